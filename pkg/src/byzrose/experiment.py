"""Synthetic data, Monte-Carlo experiment driver, result files and CSV ingestion.

Config files are INI-style with three sections::

    [experiment]
    model = logistic          ; logistic | poisson | gaussian
    m = 11, 31                ; comma lists expand into a grid
    n = 1000
    p = 30
    K = 10
    replications = 100
    seed = 2024
    methods = average, one_step_avg, rose_med, rose_k, rose_rv
    intercept = false
    central_data = true
    triangular_wire = false
    workers = 1

    [attack]
    kind = scale_statistic    ; none | scale_statistic | arbitrary | label_flip | covariate_scale | poisson_negate
    alpha = 0, 0.1, 0.2
    factor = -3
    noise_scale = 10
    center_may_be_byzantine = false
    center_is_byzantine = false

    [output]
    dir = results
    long = false              ; also write per-replication rse_long.csv
    timing = false            ; fill runtime_ms (makes results.csv run-dependent)
"""
from __future__ import annotations

import configparser
import csv
import dataclasses
import hashlib
import itertools
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__, _kernels
from .attacks import ATTACK_KINDS, AttackSpec
from .baselines import average_estimator, one_step_average, rose_med
from .local import SolverError
from .models import MODEL_KINDS, LossModel, ModelDomainError
from .reports import stack_field
from .robust import make_quantile_grid
from .rose import run_algorithm1, run_algorithm2
from .simnet import STREAM_DATA, ClusterConfig, broadcast_collect, scatter_data, stream_seed

log = logging.getLogger(__name__)

METHODS = ("average", "one_step_avg", "rose_med", "rose_k", "rose_rv")
RESULT_COLUMNS = ("method", "alpha", "m", "n", "p", "K", "replications", "mean_rse", "sd_rse",
                  "failures", "runtime_ms", "seed")
LONG_COLUMNS = ("method", "alpha", "m", "n", "p", "K", "replication", "rse", "failed")
OUTPUT_ENV = "BYZROSE_OUTPUT_DIR"


@dataclass(frozen=True)
class Dataset:
    covariates: np.ndarray
    responses: np.ndarray
    theta_star: np.ndarray | None = None
    feature_names: tuple | None = None


def default_theta_star(p: int) -> np.ndarray:
    """``p^{-1/2} ((p-1)/(p-1), (p-2)/(p-1), ..., 0)``."""
    if p < 2:
        raise ValueError("p must be at least 2")
    return (p - 1 - np.arange(p)) / (p - 1) / np.sqrt(p)


def toeplitz_covariates(rng: np.random.Generator, rows: int, p: int, rho: float = 0.5) -> np.ndarray:
    """Gaussian rows with covariance ``rho^{|i-j|}`` via the AR(1) recursion."""
    z = rng.standard_normal((rows, p))
    x = np.empty_like(z)
    x[:, 0] = z[:, 0]
    c = np.sqrt(1.0 - rho * rho)
    for l in range(1, p):
        x[:, l] = rho * x[:, l - 1] + c * z[:, l]
    return x


def generate_synthetic(model_kind: str, m: int, n: int, p: int, theta_rule="default",
                       seed=0) -> Dataset:
    """Draw ``m n`` rows from the logistic, Poisson or Gaussian regression design.

    ``theta_rule`` is ``"default"``, ``"zero"`` or an explicit vector.
    """
    if model_kind not in MODEL_KINDS:
        raise ValueError(f"unsupported model kind {model_kind!r}")
    if p < 2:
        raise ValueError("p must be at least 2")
    if isinstance(theta_rule, str):
        if theta_rule == "default":
            theta = default_theta_star(p)
        elif theta_rule == "zero":
            theta = np.zeros(p)
        else:
            raise ValueError(f"unknown theta rule {theta_rule!r}")
    else:
        theta = np.asarray(theta_rule, dtype=float).reshape(-1)
        if theta.shape[0] != p:
            raise ValueError("theta vector length must equal p")
    rng = np.random.default_rng(seed)
    x = toeplitz_covariates(rng, m * n, p)
    eta = x @ theta
    if model_kind == "logistic":
        prob = 0.5 * (1.0 + np.tanh(0.5 * eta))
        y = (rng.random(eta.shape[0]) < prob).astype(float)
    elif model_kind == "poisson":
        y = rng.poisson(np.exp(eta)).astype(float)
    else:
        y = eta + rng.standard_normal(eta.shape[0])
    return Dataset(x, y, theta)


@dataclass(frozen=True)
class ExperimentConfig:
    model: str = "logistic"
    m: int = 11
    n: int = 1000
    p: int = 30
    K: int = 10
    attack: AttackSpec = field(default_factory=AttackSpec)
    methods: tuple = ("average", "one_step_avg", "rose_med", "rose_k")
    replications: int = 100
    base_seed: int = 2024
    output_dir: str | None = None
    intercept: bool = False
    central_data: bool = True
    triangular_wire: bool = False
    workers: int = 1
    long_output: bool = False
    timing: bool = False

    def __post_init__(self):
        if self.model not in MODEL_KINDS:
            raise ValueError(f"unknown model {self.model!r}")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        bad = [mth for mth in self.methods if mth not in METHODS]
        if bad or not self.methods:
            raise ValueError(f"unknown methods {bad}; choose from {METHODS}")
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if not self.central_data and any(mth != "rose_rv" for mth in self.methods):
            raise ValueError("without central data only rose_rv can run")

    @property
    def alpha(self) -> float:
        return self.attack.alpha

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["methods"] = list(self.methods)
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass(frozen=True)
class ResultRecord:
    method: str
    alpha: float
    m: int
    n: int
    p: int
    K: int
    replications: int
    mean_rse: float
    sd_rse: float
    failures: int
    runtime_ms: int
    seed: int


def _bool(text: str) -> bool:
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _list(text: str, cast):
    return [cast(t.strip()) for t in text.split(",") if t.strip()]


def parse_config(text: str) -> list[ExperimentConfig]:
    """Parse an INI config; comma lists in m, n, p, K, alpha expand into a grid."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    cp.read_string(text)
    known = {"experiment", "attack", "output"}
    extra = set(cp.sections()) - known
    if extra:
        raise ValueError(f"unknown config sections {sorted(extra)}")
    ex = cp["experiment"] if cp.has_section("experiment") else {}
    at = cp["attack"] if cp.has_section("attack") else {}
    out = cp["output"] if cp.has_section("output") else {}
    kind = at.get("kind", "none").strip()
    if kind not in ATTACK_KINDS:
        raise ValueError(f"unknown attack kind {kind!r}")
    factor = at.get("factor")
    base = dict(
        model=ex.get("model", "logistic").strip(),
        methods=tuple(_list(ex.get("methods", "average,one_step_avg,rose_med,rose_k"), str)),
        replications=int(ex.get("replications", "100")),
        base_seed=int(ex.get("seed", "2024")),
        intercept=_bool(ex.get("intercept", "false")),
        central_data=_bool(ex.get("central_data", "true")),
        triangular_wire=_bool(ex.get("triangular_wire", "false")),
        workers=int(ex.get("workers", "1")),
        output_dir=out.get("dir"),
        long_output=_bool(out.get("long", "false")),
        timing=_bool(out.get("timing", "false")),
    )
    grid_m = _list(ex.get("m", "11"), int)
    grid_n = _list(ex.get("n", "1000"), int)
    grid_p = _list(ex.get("p", "30"), int)
    grid_k = _list(ex.get("K", "10"), int)
    grid_a = _list(at.get("alpha", "0"), float)
    configs = []
    for m, n, p, K, alpha in itertools.product(grid_m, grid_n, grid_p, grid_k, grid_a):
        spec = AttackSpec(
            kind=kind, alpha=alpha,
            factor=float(factor) if factor not in (None, "") else None,
            noise_scale=float(at.get("noise_scale", "10")),
            center_may_be_byzantine=_bool(at.get("center_may_be_byzantine", "false")),
            center_is_byzantine=_bool(at.get("center_is_byzantine", "false")),
        )
        configs.append(ExperimentConfig(m=m, n=n, p=p, K=K, attack=spec, **base))
    return configs


def load_config(path) -> list[ExperimentConfig]:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _run_method(method, cluster, model, grid):
    if method == "average":
        reports = broadcast_collect(cluster, model, "fit", 1)
        return average_estimator(stack_field(reports, "theta_hat"))
    if method == "one_step_avg":
        return one_step_average(cluster, model)
    if method == "rose_med":
        return rose_med(cluster, model)
    if method == "rose_k":
        return run_algorithm1(cluster, model, grid, with_sigma=False).theta
    return run_algorithm2(cluster, model, grid, with_sigma=False).theta


_FAILURES = (SolverError, ModelDomainError, np.linalg.LinAlgError, FloatingPointError)


def run_replication(cfg: ExperimentConfig, rep: int) -> list[tuple[str, float, float]]:
    """One replication: returns ``(method, rse or nan, seconds)`` in method order."""
    p_model = cfg.p + 1 if cfg.intercept else cfg.p
    model = LossModel(cfg.model, p_model, cfg.intercept)
    grid = make_quantile_grid(cfg.K)
    data = generate_synthetic(cfg.model, cfg.m, cfg.n, cfg.p, "default",
                              stream_seed(cfg.base_seed, rep, STREAM_DATA))
    theta_star = data.theta_star
    if cfg.intercept:
        theta_star = np.concatenate([[0.0], theta_star])
    ccfg = ClusterConfig(cfg.m, cfg.n, cfg.base_seed, cfg.attack, rep, cfg.triangular_wire)
    cluster = scatter_data(data.covariates, data.responses, ccfg, model, theta_star,
                           central_data=cfg.central_data)
    out = []
    for method in cfg.methods:
        t0 = time.perf_counter()
        try:
            with np.errstate(over="raise", invalid="raise", divide="raise"):
                est = _run_method(method, cluster, model, grid)
            rse = float(np.linalg.norm(est - theta_star))
            if not np.isfinite(rse):
                rse = float("nan")
        except _FAILURES as exc:
            log.info("replication %d, %s failed: %s", rep, method, exc)
            rse = float("nan")
        out.append((method, rse, time.perf_counter() - t0))
    return out


def _summarise(cfg, per_rep):
    records, long_rows = [], []
    for i, method in enumerate(cfg.methods):
        rses = np.array([r[i][1] for r in per_rep])
        secs = sum(r[i][2] for r in per_rep)
        ok = rses[np.isfinite(rses)]
        failures = int(rses.size - ok.size)
        mean = float(ok.mean()) if ok.size else float("nan")
        sd = float(ok.std(ddof=1)) if ok.size > 1 else 0.0
        runtime = int(round(1000 * secs)) if cfg.timing else 0
        records.append(ResultRecord(method, cfg.alpha, cfg.m, cfg.n, cfg.p, cfg.K,
                                    cfg.replications, mean, sd, failures, runtime, cfg.base_seed))
        for rep, rse in enumerate(rses):
            long_rows.append((method, cfg.alpha, cfg.m, cfg.n, cfg.p, cfg.K, rep, rse,
                              int(not np.isfinite(rse))))
    return records, long_rows, {m: sum(r[i][2] for r in per_rep) for i, m in enumerate(cfg.methods)}


def run_experiment(cfg: ExperimentConfig, return_long: bool = False):
    """Run every replication of one design cell and aggregate per method.

    Replications are independent; with ``workers > 1`` they run in a process
    pool but are combined in replication order, so results do not depend on
    scheduling.
    """
    reps = range(cfg.replications)
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            per_rep = list(pool.map(run_replication, itertools.repeat(cfg), reps))
    else:
        per_rep = [run_replication(cfg, r) for r in reps]
    records, long_rows, timings = _summarise(cfg, per_rep)
    if return_long:
        return records, long_rows, timings
    return records


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def resolve_output_dir(output_dir=None) -> str:
    return output_dir or os.environ.get(OUTPUT_ENV) or "results"


def emit_results(records, output_dir, configs=(), long_rows=None, timings=None) -> dict:
    """Write ``results.csv``, ``manifest.json`` and optionally ``rse_long.csv``."""
    os.makedirs(output_dir, exist_ok=True)
    paths = {"results": os.path.join(output_dir, "results.csv"),
             "manifest": os.path.join(output_dir, "manifest.json")}
    try:
        with open(paths["results"], "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RESULT_COLUMNS)
            for rec in records:
                w.writerow([_fmt(getattr(rec, c)) for c in RESULT_COLUMNS])
        if long_rows is not None:
            paths["long"] = os.path.join(output_dir, "rse_long.csv")
            with open(paths["long"], "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(LONG_COLUMNS)
                for row in long_rows:
                    w.writerow([_fmt(v) for v in row])
        cfg_dicts = [c.to_dict() for c in configs]
        digest = hashlib.sha256(json.dumps(cfg_dicts, sort_keys=True, default=str).encode())
        manifest = {
            "artifact_version": __version__,
            "config_hash": digest.hexdigest(),
            "configs": cfg_dicts,
            "kernel_backend": _kernels.BACKEND,
            "timings_seconds": timings or {},
        }
        with open(paths["manifest"], "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write results to {output_dir!r}: {exc}") from exc
    return paths


def read_results(path) -> list[ResultRecord]:
    casts = {"method": str, "alpha": float, "m": int, "n": int, "p": int, "K": int,
             "replications": int, "mean_rse": float, "sd_rse": float, "failures": int,
             "runtime_ms": int, "seed": int}
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [ResultRecord(**{k: casts[k](row[k]) for k in RESULT_COLUMNS}) for row in rows]


def run_configs(configs, output_dir=None) -> tuple[list, dict]:
    """Run several cells and write one combined set of result files."""
    records, long_rows, timings = [], [], {}
    for cfg in configs:
        recs, rows, t = run_experiment(cfg, return_long=True)
        records.extend(recs)
        long_rows.extend(rows)
        key = f"{cfg.model} m={cfg.m} n={cfg.n} p={cfg.p} K={cfg.K} alpha={cfg.alpha}"
        timings[key] = t
    want_long = any(c.long_output for c in configs)
    out = resolve_output_dir(output_dir or (configs[0].output_dir if configs else None))
    paths = emit_results(records, out, configs, long_rows if want_long else None, timings)
    return records, paths


def ingest_csv(path, label_column: str, feature_columns=None, model_kind: str | None = None) -> Dataset:
    """Read a header-first numeric CSV into a dataset; row order is kept.

    ``feature_columns`` defaults to every column except the label.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if label_column not in header:
            raise ValueError(f"{path}: no column named {label_column!r}")
        feats = [h for h in header if h != label_column] if feature_columns is None else list(feature_columns)
        missing = [f for f in feats if f not in header]
        if missing:
            raise ValueError(f"{path}: unknown feature columns {missing}")
        li = header.index(label_column)
        fi = [header.index(f) for f in feats]
        xs, ys = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}, line {lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                y = float(row[li])
                x = [float(row[i]) for i in fi]
            except ValueError as exc:
                raise ValueError(f"{path}, line {lineno}: {exc}") from None
            if model_kind == "logistic" and y not in (0.0, 1.0):
                raise ValueError(f"{path}, line {lineno}: label {row[li]!r} is not 0/1")
            if model_kind == "poisson" and (y < 0 or y != int(y)):
                raise ValueError(f"{path}, line {lineno}: count {row[li]!r} is not a nonnegative integer")
            xs.append(x)
            ys.append(y)
    if not ys:
        raise ValueError(f"{path}: no data rows")
    return Dataset(np.array(xs, dtype=float), np.array(ys, dtype=float), None, tuple(feats))


def write_dataset_csv(dataset: Dataset, path, label_column: str = "y") -> None:
    names = dataset.feature_names or tuple(f"x{i + 1}" for i in range(dataset.covariates.shape[1]))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow((*names, label_column))
        for x, y in zip(dataset.covariates, dataset.responses):
            w.writerow([repr(float(v)) for v in x] + [repr(float(y))])


def dk_table(k_values) -> list[tuple[int, float, float]]:
    rows = []
    for K in k_values:
        g = make_quantile_grid(K)
        rows.append((g.K, g.d_constant, g.efficiency))
    return rows
