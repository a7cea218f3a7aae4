"""Robust one-step estimation: VRMOL aggregation of parameters, gradients and
Hessians, the Newton correction, the limiting covariance and intervals.

Algorithm 1 trusts the centre's own shard for every scale estimate.
Algorithm 2 trusts nobody and takes scales from medians of what the machines
report, at twice the uplink cost.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .local import _hessian_entry_variances, _sandwich_from_terms, symmetric_solve
from .models import LossModel, shard_terms
from .reports import LocalReport, stack_field
from .robust import QuantileGrid, vrmol_columns
from .simnet import CommLedger, broadcast_collect
from .special import normal_quantile

__all__ = [
    "LocalReport", "AggregatedDerivatives", "RoseEstimate", "vrmol_parameter",
    "vrmol_gradient", "vrmol_hessian", "one_step", "sigma_vr_matrix",
    "confidence_interval", "run_algorithm1", "run_algorithm2",
]

SCALE_SOURCES = ("central", "median")


@dataclass(frozen=True)
class AggregatedDerivatives:
    gradient: np.ndarray
    hessian: np.ndarray


@dataclass(frozen=True)
class RoseEstimate:
    """Output of one ROSE run.

    ``sigma_vr`` is the estimated limiting covariance of ``sqrt(mn)(theta - theta*)``;
    it is ``None`` when the run was asked to skip it.
    """

    theta: np.ndarray
    initial: np.ndarray
    sigma_vr: np.ndarray | None
    grid: QuantileGrid
    algorithm: int
    comm: CommLedger
    derivatives: AggregatedDerivatives
    theta_med: np.ndarray
    param_scale: np.ndarray
    m: int
    n: int


def vrmol_parameter(theta_hats, scale, n: int, grid: QuantileGrid) -> np.ndarray:
    """Coordinate-wise VRMOL of the local estimates; ``scale[l]`` is sigma_l, not sigma_l/sqrt(n)."""
    t = np.asarray(theta_hats, dtype=float)
    if t.ndim != 2:
        raise ValueError("theta_hats must be an (m, p) array")
    s = np.asarray(scale, dtype=float).reshape(-1)
    if s.shape[0] != t.shape[1]:
        raise ValueError(f"{s.shape[0]} scales for dimension {t.shape[1]}")
    return vrmol_columns(t, s / np.sqrt(n), grid)


def _median_scale(stacked: np.ndarray) -> np.ndarray:
    # median over machines, then clamp: corrupted variances may be negative
    med = _kernels.median_columns(stacked.reshape(stacked.shape[0], -1)).reshape(stacked.shape[1:])
    return np.sqrt(np.maximum(med, 0.0))


def _resolve_scale(reports, field: str, scale_source: str, central_vars) -> np.ndarray:
    if scale_source == "central":
        if central_vars is None:
            raise ValueError("central scale source needs the centre's own variances")
        return np.sqrt(np.maximum(np.asarray(central_vars, dtype=float), 0.0))
    if scale_source == "median":
        return _median_scale(stack_field(reports, field))
    raise ValueError(f"scale_source must be one of {SCALE_SOURCES}")


def vrmol_gradient(reports, scale_source: str, n: int, grid: QuantileGrid,
                   central_vars=None) -> np.ndarray:
    """VRMOL of each gradient entry across machines.

    With ``scale_source="central"`` the per-entry variances come from the
    centre's shard (``central_vars``); with ``"median"`` they are the median
    of the reported ``grad_vars``.
    """
    grads = stack_field(reports, "gradient")
    sd = _resolve_scale(reports, "grad_vars", scale_source, central_vars)
    return vrmol_columns(grads, sd / np.sqrt(n), grid)


def vrmol_hessian(reports, scale_source: str, n: int, grid: QuantileGrid,
                  central_vars=None) -> np.ndarray:
    """VRMOL of the upper-triangle Hessian entries, mirrored to a symmetric matrix."""
    hess = stack_field(reports, "hessian")
    p = hess.shape[1]
    sd = _resolve_scale(reports, "hess_vars", scale_source, central_vars)
    iu, ju = np.triu_indices(p)
    vals = vrmol_columns(hess[:, iu, ju], sd[iu, ju] / np.sqrt(n), grid)
    out = np.empty((p, p))
    out[iu, ju] = vals
    out[ju, iu] = vals
    return out


def one_step(theta, g, h) -> np.ndarray:
    """Single Newton correction ``theta - H^{-1} g``."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    g = np.asarray(g, dtype=float).reshape(-1)
    if not np.any(g):
        return theta.copy()
    return theta - symmetric_solve(h, g)


def sigma_vr_matrix(sandwich, grid: QuantileGrid) -> np.ndarray:
    """Limiting covariance of the VRMOL estimate given the local sandwich matrix.

    Diagonal entries are ``D_K`` times the sandwich diagonal; off-diagonal
    entries sum bivariate-normal orthant excesses over the quantile grid at
    the sandwich correlation.
    """
    s = np.asarray(sandwich, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError("sandwich must be square")
    s = 0.5 * (s + s.T)
    d = np.diag(s)
    if np.any(d <= 0) or not np.all(np.isfinite(s)):
        raise ValueError("sandwich needs a positive finite diagonal")
    p = s.shape[0]
    sd = np.sqrt(d)
    out = np.diag(grid.d_constant * d)
    iu, ju = np.triu_indices(p, k=1)
    if iu.size:
        rho = np.clip(s[iu, ju] / (sd[iu] * sd[ju]), -1.0, 1.0)
        excess = np.zeros(iu.size)
        nz = rho != 0.0
        if nz.any():
            excess[nz] = _kernels.orthant_excess(grid.deltas, grid.kappas, rho[nz])
        vals = excess / grid.psi_sum ** 2 * sd[iu] * sd[ju]
        out[iu, ju] = vals
        out[ju, iu] = vals
    return out


def confidence_interval(estimate: RoseEstimate, v, level: float = 0.95, m: int | None = None,
                        n: int | None = None) -> tuple[float, float]:
    """Normal interval for ``v' theta*`` from the estimated limiting covariance."""
    v = np.asarray(v, dtype=float).reshape(-1)
    if abs(np.linalg.norm(v) - 1.0) > 1e-9:
        raise ValueError("v must be a unit vector")
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    if estimate.sigma_vr is None:
        raise ValueError("estimate was computed without its covariance")
    m = estimate.m if m is None else m
    n = estimate.n if n is None else n
    z = normal_quantile(0.5 + 0.5 * level)
    centre = float(v @ estimate.theta)
    half = z * np.sqrt(max(float(v @ estimate.sigma_vr @ v), 0.0) / (m * n))
    return float(centre - half), float(centre + half)


def _correlation(h: np.ndarray) -> np.ndarray:
    d = np.sqrt(np.diag(h))
    return h / np.outer(d, d)


def _rose(cluster, model: LossModel, grid: QuantileGrid, alg: int, *, zero_scales: bool = False,
          with_sigma: bool = True) -> RoseEstimate:
    ledger = CommLedger()
    m, n = cluster.m, cluster.n
    source = "central" if alg == 1 else "median"

    first = broadcast_collect(cluster, model, "fit", alg, ledger=ledger)
    thetas = stack_field(first, "theta_hat")
    theta_med = _kernels.median_columns(thetas)
    if zero_scales:
        scale = np.zeros(model.dimension)
    elif alg == 1:
        scale = np.sqrt(_sandwich_from_terms(shard_terms(cluster.central_shard, model, theta_med)))
    else:
        scale = _median_scale(stack_field(first, "sigma_diag"))
    theta_vr = vrmol_parameter(thetas, scale, n, grid)

    second = broadcast_collect(cluster, model, "derivatives", alg, theta=theta_vr, ledger=ledger)
    gvars = hvars = None
    if zero_scales:
        source = "central"
        gvars = np.zeros(model.dimension)
        hvars = np.zeros((model.dimension, model.dimension))
    elif alg == 1:
        terms = shard_terms(cluster.central_shard, model, theta_vr)
        gvars = np.var(terms.per_sample_gradients(), axis=0)
        hvars = _hessian_entry_variances(terms)
    grad = vrmol_gradient(second, source, n, grid, gvars)
    hess = vrmol_hessian(second, source, n, grid, hvars)
    theta = one_step(theta_vr, grad, hess)

    sigma = None
    if with_sigma:
        if alg == 1:
            scores = shard_terms(cluster.central_shard, model, theta).per_sample_gradients()
            middle = scores.T @ scores / scores.shape[0]
        else:
            sd = _median_scale(stack_field(second, "grad_vars"))
            middle = np.outer(sd, sd) * _correlation(hess)
        a = symmetric_solve(hess, middle)
        sigma = sigma_vr_matrix(symmetric_solve(hess, a.T), grid)
    return RoseEstimate(theta, theta_vr, sigma, grid, alg, ledger,
                        AggregatedDerivatives(grad, hess), theta_med, scale, m, n)


def run_algorithm1(cluster, model: LossModel, grid: QuantileGrid,
                   with_sigma: bool = True) -> RoseEstimate:
    """ROSE with an honest centre: every scale comes from machine 1's shard."""
    return _rose(cluster, model, grid, 1, with_sigma=with_sigma)


def run_algorithm2(cluster, model: LossModel, grid: QuantileGrid,
                   with_sigma: bool = True) -> RoseEstimate:
    """ROSE without trusting the centre: scales are medians of reported variances."""
    return _rose(cluster, model, grid, 2, with_sigma=with_sigma)

