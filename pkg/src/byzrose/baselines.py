"""Reference estimators: plain averaging, the averaged one-step estimator and
the median-only one-step estimator.

All of them read the same report stream as ROSE, so corrupted reports enter
the averages exactly as they would in a real deployment.
"""
from __future__ import annotations

import numpy as np

from . import _kernels
from .reports import stack_field
from .rose import one_step
from .simnet import broadcast_collect


def average_estimator(theta_hats) -> np.ndarray:
    t = np.asarray(theta_hats, dtype=float)
    if t.ndim != 2 or t.shape[0] == 0:
        raise ValueError("need a non-empty (m, p) array of local estimates")
    return t.mean(axis=0)


def one_step_average(cluster, model, ledger=None) -> np.ndarray:
    """Average the local estimates, then take one Newton step with averaged derivatives."""
    first = broadcast_collect(cluster, model, "fit", 1, ledger=ledger)
    theta0 = average_estimator(stack_field(first, "theta_hat"))
    second = broadcast_collect(cluster, model, "derivatives", 1, theta=theta0, ledger=ledger)
    grad = stack_field(second, "gradient").mean(axis=0)
    hess = stack_field(second, "hessian").mean(axis=0)
    return one_step(theta0, grad, 0.5 * (hess + hess.T))


def rose_med(cluster, model, ledger=None) -> np.ndarray:
    """One Newton step from the coordinate median using entry-wise median derivatives."""
    first = broadcast_collect(cluster, model, "fit", 1, ledger=ledger)
    theta0 = _kernels.median_columns(stack_field(first, "theta_hat"))
    second = broadcast_collect(cluster, model, "derivatives", 1, theta=theta0, ledger=ledger)
    grad = _kernels.median_columns(stack_field(second, "gradient"))
    hess = stack_field(second, "hessian")
    p = hess.shape[1]
    iu, ju = np.triu_indices(p)
    h = np.empty((p, p))
    h[iu, ju] = _kernels.median_columns(hess[:, iu, ju])
    h[ju, iu] = h[iu, ju]
    return one_step(theta0, grad, h)
