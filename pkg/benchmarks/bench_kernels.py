"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints one row per kernel and problem size with the best-of-N wall time of
each backend and the speedup.
"""
import argparse
import timeit

import numpy as np

from byzrose import _pykernels
from byzrose.robust import make_quantile_grid

try:
    from byzrose import _ckernels
except ImportError:
    _ckernels = None


def cases(rng):
    g = make_quantile_grid(10)
    for m, cols in ((11, 930), (31, 930), (101, 930), (1001, 200)):
        v = rng.standard_normal((m, cols))
        s = np.abs(rng.standard_normal(cols))
        yield (f"vrmol_columns m={m} cols={cols}", "vrmol_columns",
               (v, s, g.deltas, g.kappa_sum, g.psi_sum))
    for size in (1_000, 100_000):
        a, b = rng.standard_normal(size), rng.standard_normal(size)
        r = rng.uniform(-0.99, 0.99, size)
        yield f"bvn_cdf size={size}", "bvn_cdf", (a, b, r)
    rho = rng.uniform(-0.9, 0.9, 435)
    yield "orthant_excess K=10 pairs=435", "orthant_excess", (g.deltas, g.kappas, rho)


def best(fn, args, repeat):
    number = 1
    while timeit.timeit(lambda: fn(*args), number=number) < 0.05:
        number *= 2
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if _ckernels is None:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
    rng = np.random.default_rng(args.seed)
    print(f"{'case':<36}{'cython ms':>11}{'numpy ms':>11}{'speedup':>9}")
    for label, name, a in cases(rng):
        tc = best(getattr(_ckernels, name), a, args.repeat)
        tp = best(getattr(_pykernels, name), a, args.repeat)
        print(f"{label:<36}{1e3 * tc:>11.3f}{1e3 * tp:>11.3f}{tp / tc:>9.1f}")


if __name__ == "__main__":
    main()
