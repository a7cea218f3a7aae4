"""Messages a machine sends to the centre."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LocalReport:
    """One machine's transmission for one round.

    Round one fills ``theta_hat`` (and ``sigma_diag`` under Algorithm 2);
    round two fills ``gradient``/``hessian`` (plus the entry variances under
    Algorithm 2). ``corrupted`` is bookkeeping for the simulation and is
    never read by an aggregator.
    """

    machine_id: int
    theta_hat: np.ndarray | None = None
    sigma_diag: np.ndarray | None = None
    gradient: np.ndarray | None = None
    hessian: np.ndarray | None = None
    grad_vars: np.ndarray | None = None
    hess_vars: np.ndarray | None = None
    corrupted: bool = False

    def scalar_count(self, triangular: bool = False) -> int:
        """Number of scalars this report puts on the wire."""
        total = 0
        for name in ("theta_hat", "sigma_diag", "gradient", "grad_vars"):
            val = getattr(self, name)
            if val is not None:
                total += int(np.size(val))
        for name in ("hessian", "hess_vars"):
            val = getattr(self, name)
            if val is not None:
                p = np.shape(val)[0]
                total += p * (p + 1) // 2 if triangular else p * p
        return total


def stack_field(reports, name: str) -> np.ndarray:
    """Stack one field of every report along a new leading axis, in machine order."""
    ordered = sorted(reports, key=lambda r: r.machine_id)
    values = [getattr(r, name) for r in ordered]
    missing = [r.machine_id for r, v in zip(ordered, values) if v is None]
    if missing:
        raise ValueError(f"reports from machines {missing} lack field {name!r}")
    return np.stack([np.asarray(v, dtype=float) for v in values])
