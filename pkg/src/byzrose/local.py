"""Local M-estimation on a single machine and the local variance estimators."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .models import DataShard, LossModel, ModelDomainError, ShardTerms, shard_terms

MAX_CONDITION = 1e12
MAX_HALVINGS = 50
_ROUNDOFF = 8 * np.finfo(float).eps


class SolverError(RuntimeError):
    """Base class for numerical failures; carries the machine id when known."""

    machine_id: int | None = None


class NonConvergence(SolverError):
    pass


class SingularHessian(SolverError, np.linalg.LinAlgError):
    pass


def symmetric_solve(h: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``h x = rhs`` for symmetric ``h`` via an LDL^T factorization.

    Raises :class:`SingularHessian` when the condition estimate exceeds 1e12.
    """
    h = np.asarray(h, dtype=float)
    if not np.all(np.isfinite(h)):
        raise SingularHessian("Hessian has non-finite entries")
    eig = np.abs(np.linalg.eigvalsh(h))
    lo, hi = eig.min(), eig.max()
    if hi == 0.0 or lo <= hi / MAX_CONDITION:
        cond = np.inf if lo == 0.0 else hi / lo
        raise SingularHessian(f"Hessian is numerically singular (condition {cond:.3g})")
    return scipy.linalg.solve(h, rhs, assume_a="sym", check_finite=False)


@dataclass(frozen=True)
class LocalFit:
    theta_hat: np.ndarray
    sigma_diag: np.ndarray
    iterations: int
    final_grad_norm: float


def _safe_objective(shard, model, theta) -> float:
    try:
        value = shard_terms(shard, model, theta).objective()
    except ModelDomainError:
        return np.inf
    return value if np.isfinite(value) else np.inf


def fit_local(shard: DataShard, model: LossModel, init=None, tol: float = 1e-10,
              max_iter: int = 100) -> LocalFit:
    """Minimise the shard objective by damped Newton iteration.

    Each Newton step is halved (at most 50 times) until the objective
    decreases. Converges when the gradient norm is at most ``tol`` and the
    Newton step has vanished with it; a gradient that dies out while the steps
    stay O(1) means the minimiser is at infinity (separated logistic data) and
    raises :class:`NonConvergence`.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    theta = np.zeros(model.dimension) if init is None else np.array(init, dtype=float).reshape(-1)
    terms = shard_terms(shard, model, theta)
    value = terms.objective()
    for it in range(max_iter + 1):
        grad = terms.gradient()
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= tol and it == 0:
            return LocalFit(theta, _sandwich_from_terms(terms), it, gnorm)
        step = symmetric_solve(terms.hessian(), grad)
        if gnorm <= tol:
            # small gradient with O(1) Newton steps: curvature vanished, not a minimum
            if np.linalg.norm(step) > 1e-4 * max(1.0, float(np.linalg.norm(theta))):
                raise NonConvergence("iterates diverge; the minimiser is at infinity")
            return LocalFit(theta, _sandwich_from_terms(terms), it, gnorm)
        if it == max_iter:
            break
        t = 1.0
        for _ in range(MAX_HALVINGS + 1):
            candidate = theta - t * step
            cand_value = _safe_objective(shard, model, candidate)
            # near the optimum F stalls at rounding level; a tie there still counts
            if cand_value < value or cand_value <= value + _ROUNDOFF * max(1.0, abs(value)):
                break
            t *= 0.5
        else:
            raise NonConvergence(
                f"line search failed at iteration {it} (gradient norm {gnorm:.3g})")
        theta, value = candidate, cand_value
        terms = shard_terms(shard, model, theta)
    raise NonConvergence(f"no convergence after {max_iter} iterations "
                         f"(gradient norm {gnorm:.3g})")


def _sandwich_from_terms(terms: ShardTerms) -> np.ndarray:
    h = terms.hessian()
    scores = terms.per_sample_gradients()
    centered = scores - scores.mean(axis=0)
    middle = centered.T @ centered / terms.n
    a = symmetric_solve(h, middle)
    sandwich = symmetric_solve(h, a.T)
    return np.maximum(np.diag(sandwich).copy(), 0.0)


def sandwich_variance_diag(shard: DataShard, model: LossModel, theta) -> np.ndarray:
    """Diagonal of ``H^{-1} S H^{-1}`` with ``S`` the centred score covariance (divisor n)."""
    return _sandwich_from_terms(shard_terms(shard, model, theta))


def gradient_entry_variances(shard: DataShard, model: LossModel, theta) -> np.ndarray:
    scores = shard_terms(shard, model, theta).per_sample_gradients()
    return np.var(scores, axis=0)


def hessian_entry_variances(shard: DataShard, model: LossModel, theta) -> np.ndarray:
    """Entry-wise variance (divisor n) of the per-sample Hessians; symmetric output."""
    terms = shard_terms(shard, model, theta)
    return _hessian_entry_variances(terms)


def _hessian_entry_variances(terms: ShardTerms) -> np.ndarray:
    x = terms.design
    p = x.shape[1]
    iu, ju = np.triu_indices(p)
    entries = terms.hess_weight[:, None] * x[:, iu] * x[:, ju]
    out = np.zeros((p, p))
    out[iu, ju] = np.var(entries, axis=0)
    out[ju, iu] = out[iu, ju]
    return out
