"""The compiled kernels and the numpy fallback must agree."""
import importlib
import os
import subprocess
import sys

import numpy as np
import pytest

from byzrose import _kernels, _pykernels
from byzrose.robust import make_quantile_grid

try:
    from byzrose import _ckernels
except ImportError:  # extension not built in this environment
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled kernels not built")


@needs_ext
def test_backend_selected():
    assert _kernels.BACKEND == ("python" if os.environ.get("BYZROSE_PURE") == "1" else "cython")


def test_pure_env_forces_numpy():
    code = "import byzrose._kernels as k; print(k.BACKEND)"
    env = dict(os.environ, BYZROSE_PURE="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True)
    assert out.stdout.strip() == "python"


@needs_ext
@pytest.mark.parametrize("m", [1, 2, 3, 10, 11, 101])
def test_vrmol_bit_identical(m):
    rng = np.random.default_rng(m)
    for K in (1, 2, 10):
        g = make_quantile_grid(K)
        v = rng.standard_cauchy((m, 40))
        v[:, 0] = 1.5  # ties
        s = np.abs(rng.normal(size=40))
        s[1] = 0.0
        a = _ckernels.vrmol_columns(v, s, g.deltas, g.kappa_sum, g.psi_sum)
        b = _pykernels.vrmol_columns(v, s, g.deltas, g.kappa_sum, g.psi_sum)
        np.testing.assert_array_equal(a, b)


@needs_ext
def test_bvn_backends_agree():
    rng = np.random.default_rng(3)
    a = rng.normal(size=2000) * 2
    b = rng.normal(size=2000) * 2
    r = rng.uniform(-1, 1, size=2000)
    r[:5] = [-1, 1, 0, 0.925, -0.3]
    np.testing.assert_allclose(_ckernels.bvn_cdf(a, b, r), _pykernels.bvn_cdf(a, b, r), atol=1e-15)


@needs_ext
def test_orthant_backends_agree():
    g = make_quantile_grid(10)
    rhos = np.linspace(-1, 1, 21)
    np.testing.assert_allclose(_ckernels.orthant_excess(g.deltas, g.kappas, rhos),
                               _pykernels.orthant_excess(g.deltas, g.kappas, rhos), atol=1e-13)


def test_nan_reads_as_infinity():
    g = make_quantile_grid(5)
    v = np.array([[1.0, np.nan], [2.0, 0.5], [np.nan, 0.7], [0.0, 0.6], [1.5, np.nan]])
    inf = np.where(np.isnan(v), np.inf, v)
    np.testing.assert_array_equal(_kernels.median_columns(v), _pykernels.median_columns(inf))
    s = np.array([0.3, 0.1])
    np.testing.assert_array_equal(_kernels.vrmol_columns(v, s, g.deltas, g.kappa_sum, g.psi_sum),
                                  _pykernels.vrmol_columns(inf, s, g.deltas, g.kappa_sum, g.psi_sum))


def test_fallback_module_is_complete():
    mod = importlib.import_module("byzrose._pykernels")
    for name in ("median_columns", "vrmol_columns", "bvn_cdf", "orthant_excess", "BACKEND"):
        assert hasattr(mod, name)
