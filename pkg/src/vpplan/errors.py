"""Exception types raised across the package."""


class VpplanError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(VpplanError, ValueError):
    """A model or distribution parameter is outside its admissible range."""


class DimensionError(VpplanError, ValueError):
    """Array shapes do not agree."""


class DomainError(VpplanError, ValueError):
    """A tail-bound multiplier or risk level lies outside the bound's domain."""


class InfeasibleAllocationError(DomainError):
    """A risk budget cannot be split into admissible per-constraint risks."""


class DegenerateDistributionError(VpplanError, ValueError):
    """A random quantity has zero (or negative) variance where a positive one is required."""


class NotPSDError(VpplanError, ValueError):
    """A matrix expected to be positive semidefinite has a clearly negative eigenvalue."""


class NotSamplableError(VpplanError, ValueError):
    """A disturbance specification carries moments only and cannot be sampled."""


class ScenarioError(VpplanError, ValueError):
    """A scenario document failed validation.

    ``path`` names the offending field, e.g. ``vehicles[1].x0``.
    """

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class InfeasibleScenarioError(VpplanError, RuntimeError):
    """The first convex subproblem could not be solved, even with slack."""


class SolverFailure(VpplanError, RuntimeError):
    """A conic backend returned neither an optimal nor an infeasible status."""
