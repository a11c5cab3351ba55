"""Convex-concave procedure settings."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from .errors import InvalidParameterError


@dataclass(frozen=True)
class CcpConfig:
    """Stopping rule, slack penalty schedule and backend choice.

    The loop stops once consecutive fuel costs differ by less than
    ``obj_tol`` and the slack sum is below ``slack_tol``, or after
    ``max_iters`` subproblems. The slack penalty starts at ``penalty0`` and is
    multiplied by ``penalty_growth`` (up to ``penalty_max``) after every
    iterate whose slack sum is not yet below ``slack_tol``.

    ``feas_margin`` tightens every emitted row by a tiny constant so that
    solver round-off cannot turn an active row into a violated one.
    """

    obj_tol: float = 1e-6
    slack_tol: float = 1e-8
    max_iters: int = 100
    penalty0: float = 1e4
    penalty_growth: float = 2.0
    penalty_max: float = 1e9
    feas_margin: float = 1e-7
    backend: str | None = None

    def __post_init__(self):
        if not (self.obj_tol > 0 and self.slack_tol > 0):
            raise InvalidParameterError("tolerances must be positive")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise InvalidParameterError("max_iters must be a positive integer")
        if not self.penalty0 > 0 or not self.penalty_growth >= 1 or self.penalty_max < self.penalty0:
            raise InvalidParameterError("penalty schedule must be positive and non-decreasing")
        if not self.feas_margin >= 0:
            raise InvalidParameterError("feas_margin must be non-negative")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d or {}) - known
        if unknown:
            raise InvalidParameterError(f"unknown ccp keys: {sorted(unknown)}")
        return cls(**(d or {}))

    def to_dict(self):
        return asdict(self)
