"""One-sided tail bounds in mean/standard-deviation form and risk allocation.

Both bounds control ``P(x - E[x] >= lam * Std[x])``:

* Vysochanskij-Petunin (unimodal ``x``): ``4 / (9 (lam^2 + 1))`` for ``lam > sqrt(5/3)``
* Cantelli (any ``x``): ``1 / (lam^2 + 1)`` for ``lam > 0``
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DomainError, InfeasibleAllocationError

__all__ = [
    "BoundKind",
    "RiskAllocation",
    "tail_bound",
    "lambda_for_risk",
    "uniform_allocation",
    "max_risk",
    "VP_LAMBDA_MIN",
    "THRESHOLD_MAX",
]

VP_LAMBDA_MIN = math.sqrt(5.0 / 3.0)
THRESHOLD_MAX = 1.0 / 6.0


class BoundKind(str, enum.Enum):
    VP = "vp"
    CANTELLI = "cantelli"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise DomainError(f"unknown bound kind {value!r}; expected 'vp' or 'cantelli'") from None

    @property
    def numerator(self):
        """Bound is ``numerator / (lam^2 + 1)``."""
        return 4.0 / 9.0 if self is BoundKind.VP else 1.0


def max_risk(kind) -> float:
    """Supremum of admissible per-constraint risk (open interval)."""
    return THRESHOLD_MAX if BoundKind.parse(kind) is BoundKind.VP else 1.0


def tail_bound(kind, lam):
    """Tail probability bound at ``lam`` standard deviations (vectorized)."""
    kind = BoundKind.parse(kind)
    lam_arr = np.asarray(lam, dtype=float)
    # boundary sqrt(5/3) is admitted: the bound is continuous there and equals 1/6
    lo = VP_LAMBDA_MIN * (1 - 1e-15) if kind is BoundKind.VP else 0.0
    bad = ~(lam_arr >= lo) if kind is BoundKind.VP else ~(lam_arr > lo)
    if np.any(bad):
        raise DomainError(f"lambda={lam} outside the {kind.value} domain")
    out = kind.numerator / (lam_arr**2 + 1.0)
    return float(out) if out.ndim == 0 else out


def lambda_for_risk(kind, omega):
    """Inverse of :func:`tail_bound`: ``sqrt(numerator/omega - 1)`` (vectorized).

    VP accepts ``omega`` in ``(0, 1/6]`` (the closed end gives ``sqrt(5/3)``),
    Cantelli ``(0, 1)``.
    """
    kind = BoundKind.parse(kind)
    w = np.asarray(omega, dtype=float)
    hi_ok = (w <= THRESHOLD_MAX) if kind is BoundKind.VP else (w < 1.0)
    if np.any(~((w > 0) & hi_ok)):
        raise DomainError(f"risk {omega} outside the {kind.value} domain")
    lam = np.sqrt(np.maximum(kind.numerator / w - 1.0, 0.0))
    return float(lam) if lam.ndim == 0 else lam


def uniform_allocation(total, count, kind):
    """Split ``total`` evenly over ``count`` constraints.

    Returns ``(omega_hat, lambda_hat)``. Under VP the per-constraint risk must
    lie strictly below 1/6.
    """
    kind = BoundKind.parse(kind)
    if int(count) != count or count < 1:
        raise InfeasibleAllocationError(f"count must be a positive integer, got {count}")
    if not 0 < total < 1:
        raise InfeasibleAllocationError(f"risk total {total} must lie in (0, 1)")
    omega = total / count
    # keep count * omega <= total exactly despite rounding of the division
    while Fraction(omega) * int(count) > Fraction(total):
        omega = float(np.nextafter(omega, 0.0))
    if not omega < max_risk(kind):
        raise InfeasibleAllocationError(
            f"per-constraint risk {omega:.6g} is not below {max_risk(kind):.6g} "
            f"required by the {kind.value} bound")
    return omega, lambda_for_risk(kind, omega)


@dataclass
class RiskAllocation:
    """Risk split across individual constraints.

    Each map sends a row key to its risk ``omega``; multipliers follow from
    :func:`lambda_for_risk`. ``target`` is ``None`` when target multipliers
    are optimized jointly with the inputs.
    """

    kind: BoundKind
    alpha: float | None
    beta: float | None
    gamma: float | None
    target: dict | None
    collision: dict
    obstacle: dict

    @property
    def optimize_target(self):
        return self.target is None

    def target_lambda(self, key):
        return lambda_for_risk(self.kind, self.target[key])

    def collision_lambda(self, key):
        return lambda_for_risk(self.kind, self.collision[key])

    def obstacle_lambda(self, key):
        return lambda_for_risk(self.kind, self.obstacle[key])

    def check(self):
        """Boole soundness: allocated risks never exceed their budgets.

        Sums are compared in exact rational arithmetic.
        """
        def exact_sum(values):
            return sum((Fraction(float(v)) for v in values), Fraction(0))

        groups = [("collision", self.collision, self.gamma),
                  ("obstacle", self.obstacle, self.beta)]
        if self.target is not None:
            groups.insert(0, ("target", self.target, self.alpha))
        for name, rows, budget in groups:
            if not rows:
                continue
            if budget is None:
                raise InfeasibleAllocationError(f"{name} rows present but no risk budget given")
            if any(not 0 < w < max_risk(self.kind) for w in rows.values()):
                raise InfeasibleAllocationError(f"{name} risk outside the {self.kind.value} domain")
            if exact_sum(rows.values()) > Fraction(budget):
                raise InfeasibleAllocationError(f"{name} risks exceed their budget")
        return True
