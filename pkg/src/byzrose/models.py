"""GLM losses used for distributed M-estimation.

Every model here has per-sample derivatives of the form

    grad_i = g(z_i, y_i) * x_i,      hess_i = h(z_i, y_i) * x_i x_i^T

with ``z_i = x_i^T theta``, so shard-level quantities reduce to weighted
matrix products. :class:`LossModel` exposes both the single-sample evaluation
and the vectorised weights.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MODEL_KINDS = ("logistic", "poisson", "gaussian")

# exp() saturates the double range near 709
POISSON_MAX_LINEAR_PREDICTOR = 700.0


class ModelDomainError(ValueError):
    """Input outside the domain of a loss (bad response, overflow)."""


@dataclass(frozen=True)
class DataShard:
    """One machine's block of samples."""

    covariates: np.ndarray
    responses: np.ndarray
    machine_id: int = 1

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.covariates, dtype=float))
        y = np.asarray(self.responses, dtype=float).reshape(-1)
        if x.shape[0] != y.shape[0]:
            raise ValueError(
                f"covariate rows ({x.shape[0]}) != responses ({y.shape[0]})")
        if y.shape[0] < 1:
            raise ValueError("a shard needs at least one sample")
        object.__setattr__(self, "covariates", x)
        object.__setattr__(self, "responses", y)

    @property
    def n(self) -> int:
        return self.responses.shape[0]

    @property
    def dim(self) -> int:
        return self.covariates.shape[1]


@dataclass(frozen=True)
class LossModel:
    """A convex per-sample loss ``f(x, y; theta)``.

    ``intercept=True`` prepends a constant-1 column to covariates before any
    evaluation, so ``dimension`` counts the intercept.
    """

    kind: str
    dimension: int
    intercept: bool = False
    _weights: object = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}")
        if self.dimension < 1:
            raise ValueError("model dimension must be >= 1")
        object.__setattr__(self, "_weights", _WEIGHTS[self.kind])

    def design(self, covariates: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(covariates, dtype=float))
        if self.intercept:
            x = np.hstack([np.ones((x.shape[0], 1)), x])
        if x.shape[1] != self.dimension:
            raise ValueError(
                f"dimension mismatch: design has {x.shape[1]} columns, model expects {self.dimension}")
        return x

    def check_responses(self, y: np.ndarray) -> None:
        y = np.asarray(y, dtype=float)
        if self.kind == "logistic" and not np.all((y == 0) | (y == 1)):
            raise ModelDomainError("logistic responses must be 0 or 1")
        if self.kind == "poisson" and not np.all((y >= 0) & (y == np.floor(y))):
            raise ModelDomainError("poisson responses must be nonnegative integers")

    def weights(self, z: np.ndarray, y: np.ndarray):
        """Per-sample ``(loss, grad weight, hess weight)`` at linear predictors ``z``."""
        return self._weights(np.asarray(z, dtype=float), np.asarray(y, dtype=float))

    def evaluate(self, x, y, theta):
        """Single-sample ``(loss, gradient, hessian)``."""
        x = np.asarray(x, dtype=float).reshape(-1)
        theta = _as_theta(theta, self.dimension)
        if self.intercept:
            x = np.concatenate([[1.0], x])
        if x.shape[0] != self.dimension:
            raise ValueError(f"dimension mismatch: |x|={x.shape[0]}, p={self.dimension}")
        self.check_responses(np.array([y]))
        loss, g, h = self.weights(np.array([x @ theta]), np.array([float(y)]))
        return float(loss[0]), g[0] * x, h[0] * np.outer(x, x)


def _as_theta(theta, p: int) -> np.ndarray:
    t = np.asarray(theta, dtype=float).reshape(-1)
    if t.shape[0] != p:
        raise ValueError(f"dimension mismatch: |theta|={t.shape[0]}, p={p}")
    if not np.all(np.isfinite(t)):
        raise ValueError("theta has non-finite entries")
    return t


def _logistic_weights(z, y):
    # log(1 + e^z) computed as log1p(e^{-|z|}) + max(z, 0)
    loss = np.log1p(np.exp(-np.abs(z))) + np.maximum(z, 0.0) - y * z
    ez = np.exp(-np.abs(z))
    prob = np.where(z >= 0, 1.0 / (1.0 + ez), ez / (1.0 + ez))
    return loss, prob - y, prob * (1.0 - prob)


def _poisson_weights(z, y):
    if np.any(z > POISSON_MAX_LINEAR_PREDICTOR):
        raise ModelDomainError(
            f"poisson linear predictor exceeds {POISSON_MAX_LINEAR_PREDICTOR:g}")
    lam = np.exp(z)
    return lam - y * z, lam - y, lam


def _gaussian_weights(z, y):
    r = y - z
    return 0.5 * r * r, -r, np.ones_like(z)


_WEIGHTS = {
    "logistic": _logistic_weights,
    "poisson": _poisson_weights,
    "gaussian": _gaussian_weights,
}


def logistic_eval(x, y, theta):
    x = np.asarray(x, dtype=float).reshape(-1)
    return LossModel("logistic", x.shape[0]).evaluate(x, y, theta)


def poisson_eval(x, y, theta):
    x = np.asarray(x, dtype=float).reshape(-1)
    return LossModel("poisson", x.shape[0]).evaluate(x, y, theta)


def gaussian_eval(x, y, theta):
    x = np.asarray(x, dtype=float).reshape(-1)
    return LossModel("gaussian", x.shape[0]).evaluate(x, y, theta)


@dataclass(frozen=True)
class ShardTerms:
    """Per-sample pieces of a shard objective at one ``theta``.

    Kept around so the local variance estimators can reuse one evaluation.
    """

    design: np.ndarray
    loss: np.ndarray
    grad_weight: np.ndarray
    hess_weight: np.ndarray

    @property
    def n(self) -> int:
        return self.loss.shape[0]

    def per_sample_gradients(self) -> np.ndarray:
        return self.grad_weight[:, None] * self.design

    def objective(self) -> float:
        return float(np.mean(self.loss))

    def gradient(self) -> np.ndarray:
        return self.design.T @ self.grad_weight / self.n

    def hessian(self) -> np.ndarray:
        x = self.design
        h = (x * self.hess_weight[:, None]).T @ x / self.n
        return 0.5 * (h + h.T)


def shard_terms(shard: DataShard, model: LossModel, theta) -> ShardTerms:
    x = model.design(shard.covariates)
    t = _as_theta(theta, model.dimension)
    model.check_responses(shard.responses)
    loss, g, h = model.weights(x @ t, shard.responses)
    return ShardTerms(x, loss, g, h)


def shard_objective(shard: DataShard, model: LossModel, theta):
    """Sample-average loss, gradient and Hessian of ``shard`` at ``theta``."""
    terms = shard_terms(shard, model, theta)
    return terms.objective(), terms.gradient(), terms.hessian()
