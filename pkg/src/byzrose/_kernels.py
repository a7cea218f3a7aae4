"""Backend selection for the hot kernels.

The compiled ``_ckernels`` extension is used when it was built; otherwise
the numpy implementation in ``_pykernels``. Set ``BYZROSE_PURE=1`` to force
the numpy path.

NaN entries are read as +inf before sorting, so a machine that sends NaN
is treated like one that sends a huge value.
"""
import os

import numpy as np

from . import _pykernels

if os.environ.get("BYZROSE_PURE", "") == "1":
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = _impl.BACKEND


def _no_nan(values):
    v = np.asarray(values, dtype=float)
    if np.isnan(v).any():
        v = np.where(np.isnan(v), np.inf, v)
    return v


def median_columns(values):
    # numpy on both backends: its vectorised sort wins at every size we benchmarked
    return _pykernels.median_columns(_no_nan(values))


def vrmol_columns(values, scales, deltas, kappa_sum, psi_sum):
    return _impl.vrmol_columns(_no_nan(values), scales, deltas, kappa_sum, psi_sum)


bvn_cdf = _impl.bvn_cdf
orthant_excess = _impl.orthant_excess
