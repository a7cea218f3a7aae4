"""In-process simulation of one centre and m node machines.

Machine ids run from 1 to m; machine 1 is the central processor and also
holds a data shard. Every scalar a machine sends or receives is credited to
a :class:`CommLedger`.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .attacks import AttackSpec, attack_data, attack_statistics, build_byzantine_set
from .local import LocalFit, SolverError, _hessian_entry_variances, fit_local
from .models import DataShard, LossModel, ModelDomainError, shard_terms
from .reports import LocalReport

log = logging.getLogger(__name__)

NODE_TO_CENTER = "node->center"
CENTER_TO_NODE = "center->node"

# sub-stream tags for stream_seed
STREAM_DATA = 0
STREAM_BYZANTINE_SET = 1
STREAM_DATA_ATTACK = 2
STREAM_STAT_ATTACK = 3
STREAM_PLACEHOLDER = 4


def stream_seed(base_seed: int, replication: int, stream: int, machine: int = 0,
                round_: int = 0) -> np.random.SeedSequence:
    """Independent PRNG stream for (replication, purpose, machine, round).

    Uses numpy's SeedSequence hashing with the tuple as spawn key, so streams
    never overlap and do not depend on evaluation order.
    """
    return np.random.SeedSequence(int(base_seed), spawn_key=(int(replication), int(stream),
                                                              int(machine), int(round_)))


class WorkerError(SolverError):
    """A node failed to compute its statistics."""

    def __init__(self, machine_id: int, cause: Exception):
        super().__init__(f"machine {machine_id}: {cause}")
        self.machine_id = machine_id
        self.cause = cause


@dataclass(frozen=True)
class ClusterConfig:
    m: int
    n: int
    seed: int = 0
    attack: AttackSpec = field(default_factory=AttackSpec)
    replication: int = 0
    triangular_wire: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.m < 3:
            raise ValueError(f"need at least 3 machines, got m={self.m}")
        if self.n < 1:
            raise ValueError(f"need n >= 1, got {self.n}")


@dataclass(frozen=True)
class CommRecord:
    round: int
    direction: str
    machine_id: int
    count: int


class CommLedger:
    """Append-only log of scalar counts per round, direction and machine."""

    def __init__(self):
        self._records: list[CommRecord] = []

    def add(self, round_: int, direction: str, machine_id: int, count: int) -> None:
        if count < 0:
            raise ValueError("scalar counts are nonnegative")
        if direction not in (NODE_TO_CENTER, CENTER_TO_NODE):
            raise ValueError(f"unknown direction {direction!r}")
        self._records.append(CommRecord(round_, direction, machine_id, int(count)))

    @property
    def records(self) -> tuple:
        return tuple(self._records)

    def round_total(self, round_: int, direction: str = NODE_TO_CENTER) -> int:
        return sum(r.count for r in self._records if r.round == round_ and r.direction == direction)

    def __len__(self):
        return len(self._records)


def ledger_totals(ledger: CommLedger) -> tuple[int, int]:
    up = sum(r.count for r in ledger.records if r.direction == NODE_TO_CENTER)
    down = sum(r.count for r in ledger.records if r.direction == CENTER_TO_NODE)
    return up, down


class Cluster:
    """Shards plus the Byzantine set; local fits are cached per loss model.

    ``shards[0]`` may be ``None`` to model a centre without data, which
    only Algorithm 2 supports.
    """

    def __init__(self, shards, config: ClusterConfig, byzantine=frozenset()):
        shards = list(shards)
        if len(shards) != config.m:
            raise ValueError(f"expected {config.m} shards, got {len(shards)}")
        for j, s in enumerate(shards, start=1):
            if s is None and j != 1:
                raise ValueError(f"machine {j} has no data")
            if s is not None and s.machine_id != j:
                raise ValueError(f"shard in slot {j} is labelled machine {s.machine_id}")
        self.shards = shards
        self.config = config
        self.byzantine = frozenset(byzantine)
        self.ledger = CommLedger()
        self._fits: dict = {}

    @property
    def m(self) -> int:
        return self.config.m

    @property
    def n(self) -> int:
        return self.config.n

    @property
    def central_shard(self) -> DataShard:
        if self.shards[0] is None:
            raise ValueError("the central processor holds no data")
        return self.shards[0]

    def local_fit(self, model: LossModel, machine_id: int) -> LocalFit:
        key = (model, machine_id)
        if key not in self._fits:
            try:
                self._fits[key] = fit_local(self.shards[machine_id - 1], model)
            except (SolverError, ModelDomainError, np.linalg.LinAlgError) as exc:
                self._fits[key] = exc
        out = self._fits[key]
        if isinstance(out, Exception):
            raise WorkerError(machine_id, out)
        return out

    def _map(self, fn, ids):
        if self.config.workers > 1:
            with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
                return list(pool.map(fn, ids))
        return [fn(j) for j in ids]


def scatter_data(covariates, responses, config: ClusterConfig, model: LossModel | None = None,
                 theta_star=None, central_data: bool = True) -> Cluster:
    """Split ``m n`` rows into contiguous blocks and apply data attacks.

    The Byzantine set is drawn from the configuration's own PRNG stream.
    """
    x = np.asarray(covariates, dtype=float)
    y = np.asarray(responses, dtype=float).reshape(-1)
    m, n = config.m, config.n
    if x.ndim != 2 or x.shape[0] != m * n or y.shape[0] != m * n:
        raise ValueError(f"dataset has {x.shape[0] if x.ndim else 0} rows, need m*n = {m * n}")
    spec = config.attack
    byz = build_byzantine_set(m, spec, stream_seed(config.seed, config.replication,
                                                   STREAM_BYZANTINE_SET))
    shards = []
    for j in range(1, m + 1):
        rows = slice((j - 1) * n, j * n)
        shard = DataShard(x[rows], y[rows], j)
        if j in byz and spec.is_data_attack:
            if spec.kind == "poisson_negate" and (model is None or theta_star is None):
                raise ValueError("poisson_negate needs the model and theta_star")
            seed = stream_seed(config.seed, config.replication, STREAM_DATA_ATTACK, j)
            shard = attack_data(shard, model, theta_star, spec, seed)
        shards.append(shard)
    if not central_data:
        shards[0] = None
    return Cluster(shards, config, byz)


def _placeholder_report(cluster: Cluster, p: int, round_: int, alg: int, fields_: tuple) -> LocalReport:
    # a centre without data sends random numbers; they are treated as Byzantine
    rng = np.random.default_rng(stream_seed(cluster.config.seed, cluster.config.replication,
                                            STREAM_PLACEHOLDER, 1, round_))
    vals = {}
    for name in fields_:
        if name in ("hessian", "hess_vars"):
            a = rng.standard_normal((p, p))
            v = 0.5 * (a + a.T)
        else:
            v = rng.standard_normal(p)
        if name in ("sigma_diag", "grad_vars", "hess_vars"):
            v = np.abs(v)
        vals[name] = v
    return LocalReport(1, corrupted=True, **vals)


def _zero_report(machine_id: int, p: int, fields_: tuple) -> LocalReport:
    vals = {name: np.zeros((p, p)) if name in ("hessian", "hess_vars") else np.zeros(p)
            for name in fields_}
    return LocalReport(machine_id, corrupted=True, **vals)


def _fields(request: str, alg: int) -> tuple:
    if request == "fit":
        return ("theta_hat",) if alg == 1 else ("theta_hat", "sigma_diag")
    return ("gradient", "hessian") if alg == 1 else ("gradient", "hessian", "grad_vars", "hess_vars")


def _honest_report(cluster: Cluster, model: LossModel, j: int, request: str, alg: int,
                   theta) -> LocalReport:
    if request == "fit":
        fit = cluster.local_fit(model, j)
        return LocalReport(j, theta_hat=fit.theta_hat,
                           sigma_diag=fit.sigma_diag if alg == 2 else None)
    try:
        terms = shard_terms(cluster.shards[j - 1], model, theta)
        grad, hess = terms.gradient(), terms.hessian()
        if alg == 1:
            return LocalReport(j, gradient=grad, hessian=hess)
        return LocalReport(j, gradient=grad, hessian=hess,
                           grad_vars=np.var(terms.per_sample_gradients(), axis=0),
                           hess_vars=_hessian_entry_variances(terms))
    except (ModelDomainError, FloatingPointError) as exc:
        raise WorkerError(j, exc) from exc


def broadcast_collect(cluster: Cluster, model: LossModel, request: str, alg: int = 1,
                      theta=None, ledger: CommLedger | None = None) -> list:
    """Run one communication round and return reports in machine-id order.

    ``request`` is ``"fit"`` (round 1) or ``"derivatives"`` (round 2, at
    ``theta``, which is broadcast first). Statistic attacks are applied on
    the way out of Byzantine machines. A failure on an honest machine raises
    :class:`WorkerError`; a failing Byzantine machine sends zeros instead.
    """
    if request not in ("fit", "derivatives"):
        raise ValueError(f"unknown request {request!r}")
    if alg not in (1, 2):
        raise ValueError("alg must be 1 or 2")
    ledger = cluster.ledger if ledger is None else ledger
    p = model.dimension
    round_ = 1 if request == "fit" else 2
    wanted = _fields(request, alg)
    if request == "derivatives":
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.shape[0] != p:
            raise ValueError(f"theta has {theta.shape[0]} entries, model needs {p}")
        for j in range(1, cluster.m + 1):
            ledger.add(round_, CENTER_TO_NODE, j, p)
    spec = cluster.config.attack

    def work(j):
        if cluster.shards[j - 1] is None:
            return _placeholder_report(cluster, p, round_, alg, wanted)
        try:
            rep = _honest_report(cluster, model, j, request, alg, theta)
        except WorkerError:
            if j not in cluster.byzantine:
                raise
            log.debug("Byzantine machine %d failed locally; sending zeros", j)
            return _zero_report(j, p, wanted)
        if j in cluster.byzantine:
            if spec.is_statistic_attack:
                seed = stream_seed(cluster.config.seed, cluster.config.replication,
                                   STREAM_STAT_ATTACK, j, round_)
                rep = attack_statistics(rep, spec, seed)
            else:
                rep = replace(rep, corrupted=True)
        return rep

    reports = cluster._map(work, range(1, cluster.m + 1))
    for rep in reports:
        ledger.add(round_, NODE_TO_CENTER, rep.machine_id,
                   rep.scalar_count(cluster.config.triangular_wire))
    return reports
