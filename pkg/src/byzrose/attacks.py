"""Byzantine machine selection and attack models.

Statistic attacks act on what a machine transmits; data attacks act on its
shard before any local computation. ``AttackSpec.kind`` decides which.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

import numpy as np

from .models import DataShard

STATISTIC_ATTACKS = ("scale_statistic", "arbitrary")
DATA_ATTACKS = ("label_flip", "covariate_scale", "poisson_negate")
ATTACK_KINDS = ("none",) + STATISTIC_ATTACKS + DATA_ATTACKS

# fields of LocalReport that carry transmitted numbers
REPORT_FIELDS = ("theta_hat", "sigma_diag", "gradient", "hessian", "grad_vars", "hess_vars")


@dataclass(frozen=True)
class AttackSpec:
    """Which attack, how many machines, and whether machine 1 may be hit.

    ``factor`` is used by ``scale_statistic`` (default -3) and
    ``covariate_scale`` (default 10); ``noise_scale`` by ``arbitrary``.
    ``center_is_byzantine`` forces machine 1 into the Byzantine set.
    """

    kind: str = "none"
    alpha: float = 0.0
    factor: float | None = None
    noise_scale: float = 10.0
    center_may_be_byzantine: bool = False
    center_is_byzantine: bool = False

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}; expected one of {ATTACK_KINDS}")
        if not 0.0 <= self.alpha < 0.5:
            raise ValueError(f"alpha must be in [0, 0.5), got {self.alpha}")
        if self.factor is not None and (not math.isfinite(self.factor) or self.factor == 0):
            raise ValueError("attack factor must be finite and nonzero")
        if self.center_is_byzantine and not self.center_may_be_byzantine:
            object.__setattr__(self, "center_may_be_byzantine", True)

    @property
    def effective_factor(self) -> float:
        if self.factor is not None:
            return float(self.factor)
        return 10.0 if self.kind == "covariate_scale" else -3.0

    @property
    def is_data_attack(self) -> bool:
        return self.kind in DATA_ATTACKS

    @property
    def is_statistic_attack(self) -> bool:
        return self.kind in STATISTIC_ATTACKS


def byzantine_count(m: int, alpha: float) -> int:
    # the small epsilon keeps e.g. 0.1 * 30 = 3.0000000000000004 from rounding oddly
    return int(math.floor(alpha * m + 1e-9))


def build_byzantine_set(m: int, spec: AttackSpec, seed) -> frozenset:
    """Draw ``floor(alpha m)`` machine ids without replacement.

    Ids come from ``{2..m}`` unless the centre may be Byzantine. With
    ``center_is_byzantine`` machine 1 is always included and the rest are
    drawn from ``{2..m}``.
    """
    if m < 1:
        raise ValueError("m must be positive")
    count = byzantine_count(m, spec.alpha) if spec.kind != "none" else 0
    if 2 * count >= m and count > 0:
        raise ValueError(f"{count} Byzantine machines out of {m} is not a minority")
    if count == 0:
        return frozenset()
    rng = np.random.default_rng(seed)
    if spec.center_is_byzantine:
        rest = rng.choice(np.arange(2, m + 1), size=count - 1, replace=False)
        return frozenset([1] + [int(i) for i in rest])
    pool = np.arange(1 if spec.center_may_be_byzantine else 2, m + 1)
    if count > pool.size:
        raise ValueError("not enough eligible machines")
    return frozenset(int(i) for i in rng.choice(pool, size=count, replace=False))


def attack_statistics(report, spec: AttackSpec, seed=None):
    """Return a corrupted copy of ``report``; the input is left untouched."""
    changes = {"corrupted": True}
    if spec.kind == "scale_statistic":
        c = spec.effective_factor
        for name in REPORT_FIELDS:
            val = getattr(report, name)
            if val is not None:
                changes[name] = c * val
    elif spec.kind == "arbitrary":
        rng = np.random.default_rng(seed)
        for name in REPORT_FIELDS:
            val = getattr(report, name)
            if val is not None:
                noise = spec.noise_scale * rng.standard_cauchy(np.shape(val))
                if name in ("hessian", "hess_vars"):
                    noise = 0.5 * (noise + noise.T)
                changes[name] = noise
    return replace(report, **changes)


def attack_data(shard: DataShard, model, theta_star, spec: AttackSpec, seed=None) -> DataShard:
    """Corrupt one machine's raw data; returns a new shard."""
    x, y = shard.covariates, shard.responses
    if spec.kind == "label_flip":
        if not np.all((y == 0) | (y == 1)):
            raise ValueError(f"label_flip needs binary responses (machine {shard.machine_id})")
        return DataShard(x.copy(), 1.0 - y, shard.machine_id)
    if spec.kind == "covariate_scale":
        return DataShard(spec.effective_factor * x, y.copy(), shard.machine_id)
    if spec.kind == "poisson_negate":
        rng = np.random.default_rng(seed)
        eta = -(model.design(x) @ np.asarray(theta_star, dtype=float))
        return DataShard(x.copy(), rng.poisson(np.exp(eta)).astype(float), shard.machine_id)
    raise ValueError(f"{spec.kind!r} is not a data attack")


def as_dict(spec: AttackSpec) -> dict:
    return {f.name: getattr(spec, f.name) for f in fields(spec)}
