"""Command-line entry point: ``byzrose dk-table | simulate | bench | ingest``."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

import numpy as np

from . import __version__
from .attacks import AttackSpec
from .experiment import (OUTPUT_ENV, ExperimentConfig, dk_table, ingest_csv, load_config,
                         run_configs)
from .local import SolverError
from .models import LossModel
from .robust import make_quantile_grid
from .rose import confidence_interval, run_algorithm1, run_algorithm2
from .simnet import ClusterConfig, ledger_totals, scatter_data

DEFAULT_K = (3, 5, 7, 10, 15, 20, 30, 50, 100)
GRID_N = (200, 300, 500, 1000)
GRID_M = (11, 31, 101)

# design grids of the published simulation tables
SUITES = {
    "table2": dict(model="logistic", attack="scale_statistic", alphas=(0.0, 0.1, 0.2),
                   methods=("average", "one_step_avg", "rose_med", "rose_k"), center=False),
    "table3": dict(model="poisson", attack="poisson_negate", alphas=(0.0, 0.1, 0.2),
                   methods=("average", "one_step_avg", "rose_med", "rose_k"), center=False),
    "table4": dict(model="logistic", attack="label_flip", alphas=(0.1, 0.2),
                   methods=("rose_rv", "rose_k"), center=True),
    "table5": dict(model="logistic", attack="covariate_scale", alphas=(0.1, 0.2),
                   methods=("rose_rv",), center=True),
    "table6": dict(model="poisson", attack="poisson_negate", alphas=(0.1, 0.2),
                   methods=("rose_rv", "rose_k"), center=True),
    "table7": dict(model="poisson", attack="covariate_scale", alphas=(0.1, 0.2),
                   methods=("rose_rv",), center=True),
}


def _int_list(text):
    return [int(t) for t in text.split(",") if t.strip()]


def suite_configs(name, m_values=None, n_values=None, replications=100, seed=2024, K=10, p=30,
                  workers=1):
    s = SUITES[name]
    out = []
    for m in m_values or GRID_M:
        for n in n_values or GRID_N:
            for alpha in s["alphas"]:
                spec = AttackSpec(kind=s["attack"] if alpha > 0 else "none", alpha=alpha,
                                  center_is_byzantine=s["center"] and alpha > 0)
                out.append(ExperimentConfig(model=s["model"], m=m, n=n, p=p, K=K, attack=spec,
                                            methods=s["methods"], replications=replications,
                                            base_seed=seed, workers=workers))
    return out


def _print_records(records, out=sys.stdout):
    print(f"{'method':<13}{'alpha':>6}{'m':>5}{'n':>6}{'mean_rse':>10}{'sd_rse':>9}{'fail':>5}",
          file=out)
    for r in records:
        print(f"{r.method:<13}{r.alpha:>6.2f}{r.m:>5}{r.n:>6}{r.mean_rse:>10.4f}{r.sd_rse:>9.4f}"
              f"{r.failures:>5}", file=out)


def cmd_dk_table(args):
    ks = _int_list(args.k) if args.k else list(DEFAULT_K)
    if any(k < 1 for k in ks):
        raise SystemExit("error: every K must be >= 1")
    print(f"{'K':>4} {'D_K':>6} {'eff':>6}")
    for K, d, e in dk_table(ks):
        print(f"{K:>4} {d:6.3f} {e:6.3f}")
    return 0


def cmd_simulate(args):
    configs = load_config(args.config)
    if args.replications:
        configs = [dataclasses.replace(c, replications=args.replications) for c in configs]
    records, paths = run_configs(configs, args.output)
    _print_records(records)
    print(f"wrote {paths['results']}")
    return 0


def cmd_bench(args):
    configs = suite_configs(args.suite, _int_list(args.m) if args.m else None,
                            _int_list(args.n) if args.n else None, args.replications, args.seed,
                            args.K, args.p, args.workers)
    records, paths = run_configs(configs, args.output)
    _print_records(records)
    print(f"wrote {paths['results']}")
    return 0


def cmd_ingest(args):
    data = ingest_csv(args.csv, args.label, _split(args.features), args.model)
    rows, q = data.covariates.shape
    n = rows // args.m
    if n < 1:
        raise SystemExit(f"error: {rows} rows cannot fill {args.m} machines")
    if n * args.m != rows:
        logging.warning("dropping the last %d rows so every machine gets %d", rows - n * args.m, n)
    x, y = data.covariates[: n * args.m], data.responses[: n * args.m]
    model = LossModel(args.model, q + 1 if args.intercept else q, args.intercept)
    cluster = scatter_data(x, y, ClusterConfig(args.m, n, args.seed))
    grid = make_quantile_grid(args.K)
    run = run_algorithm1 if args.alg == 1 else run_algorithm2
    est = run(cluster, model, grid)
    names = (["(intercept)"] if args.intercept else []) + list(data.feature_names)
    up, down = ledger_totals(est.comm)
    print(f"ROSE (algorithm {args.alg}, K={args.K}) on m={args.m} machines of n={n} rows")
    print(f"{'coefficient':<20}{'estimate':>12}{'ci_low':>12}{'ci_high':>12}")
    for l, name in enumerate(names):
        v = np.zeros(len(names))
        v[l] = 1.0
        lo, hi = confidence_interval(est, v, args.level)
        print(f"{name:<20}{est.theta[l]:>12.5f}{lo:>12.5f}{hi:>12.5f}")
    print(f"scalars sent node->center: {up}, center->node: {down}")
    return 0


def _split(text):
    return [t.strip() for t in text.split(",") if t.strip()] if text else None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="byzrose", description=__doc__)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dk-table", help="print D_K and the efficiency 1/D_K")
    p.add_argument("--k", help="comma-separated K values")
    p.set_defaults(func=cmd_dk_table)

    p = sub.add_parser("simulate", help="run the Monte-Carlo experiment described by a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--output", help=f"output directory (default ${OUTPUT_ENV} or ./results)")
    p.add_argument("--replications", type=int, help="override the replication count")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="run a pre-baked table suite")
    p.add_argument("--suite", required=True, choices=sorted(SUITES))
    p.add_argument("--m", help="restrict to these machine counts")
    p.add_argument("--n", help="restrict to these local sample sizes")
    p.add_argument("--replications", type=int, default=100)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--K", type=int, default=10)
    p.add_argument("--p", type=int, default=30)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--output")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("ingest", help="fit ROSE to a labelled CSV file")
    p.add_argument("--csv", required=True)
    p.add_argument("--label", required=True)
    p.add_argument("--features", help="comma-separated feature columns (default: all others)")
    p.add_argument("--model", default="logistic", choices=("logistic", "poisson", "gaussian"))
    p.add_argument("--m", type=int, default=11)
    p.add_argument("--K", type=int, default=10)
    p.add_argument("--alg", type=int, default=2, choices=(1, 2))
    p.add_argument("--intercept", action="store_true")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_ingest)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, SolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
