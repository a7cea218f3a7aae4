"""Quantile grid and the scalar robust aggregators (median, trimmed mean, VRMOL)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .special import normal_pdf, normal_quantile


@dataclass(frozen=True)
class QuantileGrid:
    """Levels ``k/(K+1)``, their normal quantiles and density weights.

    ``d_constant`` is the variance inflation of VRMOL relative to the mean:
    pi/2 for K=1, decreasing towards pi/3 as K grows.
    """

    K: int
    kappas: np.ndarray
    deltas: np.ndarray
    psi_weights: np.ndarray
    psi_sum: float
    kappa_sum: float
    d_constant: float

    @property
    def efficiency(self) -> float:
        return 1.0 / self.d_constant


def make_quantile_grid(K: int) -> QuantileGrid:
    if int(K) != K or K < 1:
        raise ValueError(f"K must be a positive integer, got {K!r}")
    K = int(K)
    kappas = np.arange(1, K + 1) / (K + 1)
    deltas = np.array([normal_quantile(k) for k in kappas])
    psi = normal_pdf(deltas)
    psi_sum = float(psi.sum())
    num = np.minimum.outer(kappas, kappas) - np.outer(kappas, kappas)
    d_k = float(num.sum()) / psi_sum ** 2
    for arr in (kappas, deltas, psi):
        arr.setflags(write=False)
    return QuantileGrid(K, kappas, deltas, psi, psi_sum, float(kappas.sum()), d_k)


def coordinate_median(values) -> float:
    v = np.asarray(values, dtype=float).reshape(-1)
    if v.size == 0:
        raise ValueError("median of an empty sequence")
    return float(_kernels.median_columns(v[:, None])[0])


def trimmed_mean(values, trim_fraction: float) -> float:
    """Mean after dropping ``floor(beta * m)`` values from each end."""
    if not 0.0 <= trim_fraction < 0.5:
        raise ValueError("trim_fraction must be in [0, 0.5)")
    v = np.sort(np.asarray(values, dtype=float).reshape(-1))
    cut = int(math.floor(trim_fraction * v.size))
    kept = v[cut:v.size - cut]
    if kept.size == 0:
        raise ValueError("no values survive trimming")
    return float(kept.mean())


def vrmol_columns(values, scales, grid: QuantileGrid) -> np.ndarray:
    """VRMOL aggregate of each column of an ``(m, L)`` array.

    ``scales`` holds the sampling standard deviation of a single value for
    each column (already divided by sqrt(n) where applicable).
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 2 or v.shape[0] < 1:
        raise ValueError("values must be a non-empty (m, L) array")
    s = np.asarray(scales, dtype=float).reshape(-1)
    if s.shape[0] != v.shape[1]:
        raise ValueError(f"got {s.shape[0]} scales for {v.shape[1]} columns")
    if np.any(s < 0) or not np.all(np.isfinite(s)):
        raise ValueError("scales must be finite and nonnegative")
    return _kernels.vrmol_columns(v, s, grid.deltas, grid.kappa_sum, grid.psi_sum)


def vrmol_scalar(values, per_value_sd: float, grid: QuantileGrid) -> float:
    v = np.asarray(values, dtype=float).reshape(-1)
    if v.size == 0:
        raise ValueError("VRMOL of an empty sequence")
    return float(vrmol_columns(v[:, None], [per_value_sd], grid)[0])
