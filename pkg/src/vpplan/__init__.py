"""Chance-constrained open-loop planning for stochastic LTI vehicles.

Chance constraints are replaced by mean/standard-deviation surrogates from
the one-sided Vysochanskij-Petunin inequality (or Cantelli's, for
comparison); collision avoidance becomes a difference-of-convex program
solved by the convex-concave procedure.
"""

from .bounds import BoundKind, RiskAllocation, lambda_for_risk, tail_bound, uniform_allocation
from .config import CcpConfig
from .dynamics import (
    ConcatenatedDynamics,
    CwhParams,
    LtiSystem,
    build_concatenated,
    cwh_transition,
    discretize_cwh,
    mean_trajectory,
)
from .moments import ComponentMoments, DisturbanceSpec, quadratic_moments
from .scenario import Scenario, load_fixture, load_scenario, parse_scenario
from .solver import PlanSolution, compare_bounds, solve_ccp
from .unimodality import EcdfPoints, UnimodalityConfig, check_unimodal, ecdf, validate_constraint_unimodality
from .validation import SampleBatch, SatisfactionReport, measure_satisfaction, sample_disturbances

__all__ = [
    "BoundKind",
    "RiskAllocation",
    "lambda_for_risk",
    "tail_bound",
    "uniform_allocation",
    "CcpConfig",
    "ConcatenatedDynamics",
    "CwhParams",
    "LtiSystem",
    "build_concatenated",
    "cwh_transition",
    "discretize_cwh",
    "mean_trajectory",
    "ComponentMoments",
    "DisturbanceSpec",
    "quadratic_moments",
    "Scenario",
    "load_fixture",
    "load_scenario",
    "parse_scenario",
    "PlanSolution",
    "compare_bounds",
    "solve_ccp",
    "EcdfPoints",
    "UnimodalityConfig",
    "check_unimodal",
    "ecdf",
    "validate_constraint_unimodality",
    "SampleBatch",
    "SatisfactionReport",
    "measure_satisfaction",
    "sample_disturbances",
]
