"""Standard normal pdf/cdf/quantile and the bivariate normal cdf."""
from __future__ import annotations

import math

import numpy as np

from . import _kernels

_INV_SQRT_2PI = 0.3989422804014327
_SQRT1_2 = 0.7071067811865476

# Acklam's rational approximation to the normal quantile
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def std_normal(x: float) -> tuple[float, float]:
    """Return ``(pdf, cdf)`` of the standard normal at ``x``."""
    x = float(x)
    pdf = _INV_SQRT_2PI * math.exp(-0.5 * x * x)
    cdf = 0.5 * math.erfc(-x * _SQRT1_2)
    return pdf, cdf


def normal_pdf(x):
    x = np.asarray(x, dtype=float)
    return _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def _acklam(u: float) -> float:
    if u < _P_LOW:
        q = math.sqrt(-2.0 * math.log(u))
        return ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
                / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    if u > 1.0 - _P_LOW:
        return -_acklam(1.0 - u)
    q = u - 0.5
    r = q * q
    return ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
            / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0))


def normal_quantile(u: float) -> float:
    """Inverse standard normal cdf.

    Acklam's approximation (relative error about 1e-9) followed by one
    Halley step on the erfc-based cdf. Upper-half arguments are reflected
    so that ``normal_quantile(1 - u) == -normal_quantile(u)`` exactly
    whenever ``1 - u`` is representable.
    """
    u = float(u)
    if not 0.0 < u < 1.0:
        raise ValueError(f"normal_quantile needs 0 < u < 1, got {u!r}")
    if u > 0.5:
        return -normal_quantile(1.0 - u)
    if u == 0.5:
        return 0.0
    x = _acklam(u)
    pdf, cdf = std_normal(x)
    e = cdf - u
    step = e / pdf
    return x - step / (1.0 + 0.5 * x * step)


def bivariate_normal_cdf(a, b, rho):
    """``P(X <= a, Y <= b)`` for a standard bivariate normal with correlation ``rho``.

    Accepts scalars or broadcastable arrays; scalars give a float.
    """
    r = np.asarray(rho, dtype=float)
    if np.any(np.abs(r) > 1.0) or np.any(np.isnan(r)):
        raise ValueError("correlation must lie in [-1, 1]")
    # Phi(+-40) is 1/0 to double precision; clipping keeps infinities out of the quadrature
    out = _kernels.bvn_cdf(np.clip(a, -40.0, 40.0), np.clip(b, -40.0, 40.0), r)
    if np.ndim(out) == 0 or (np.ndim(a) == 0 and np.ndim(b) == 0 and r.ndim == 0):
        return float(np.reshape(out, ()))
    return out
