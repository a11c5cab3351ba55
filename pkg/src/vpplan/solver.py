"""Convex-concave procedure over the reformulated problem.

Each iteration solves the convex subproblem from
:func:`~vpplan.reformulate.assemble_problem` at the previous iterate (the
first one at zero input), then moves the linearization point. The loop stops
when consecutive fuel costs agree to ``obj_tol`` and the slack sum is below
``slack_tol``. A converged plan is certified by re-evaluating every collision
row without linearization and every target row at its tightest admissible
multiplier.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .backends import OPTIMAL, get_backend
from .bounds import BoundKind, lambda_for_risk, tail_bound
from .config import CcpConfig
from .dynamics import mean_trajectory
from .errors import InfeasibleAllocationError, InfeasibleScenarioError, VpplanError
from .reformulate import LinearizationPoint, Reformulation, assemble_problem, exact_dc_row_value

__all__ = [
    "CcpConfig",
    "IterationRecord",
    "PlanSolution",
    "Comparison",
    "solve_ccp",
    "compare_bounds",
    "certify",
    "CERT_TOL",
]

log = logging.getLogger(__name__)

CERT_TOL = 1e-9


@dataclass
class IterationRecord:
    iteration: int
    cost: float
    penalized: float
    slack_sum: float
    penalty: float
    status: str


@dataclass
class PlanSolution:
    """Result of one convex-concave run.

    ``U`` has shape ``(Nv, N, m)`` and ``mean_states`` ``(Nv, N+1, n)``.
    ``collision_margins`` are exact (non-linearized) row values, non-negative
    when satisfied; ``target_margins`` are ``h - E - lam * Std`` at the
    certifying multipliers.
    """

    bound: BoundKind
    U: np.ndarray
    mean_states: np.ndarray
    cost: float
    iterations: int
    slack_sum: float
    converged: bool
    certified: bool
    trace: list
    target_lambdas: dict
    target_risk: float
    target_margins: dict
    collision_margins: dict
    scenario_hash: str = ""
    notes: list = field(default_factory=list)

    def to_dict(self):
        def keystr(k):
            return ":".join(str(p) for p in k)

        return {
            "scenario_hash": self.scenario_hash,
            "bound": self.bound.value,
            "cost": self.cost,
            "iterations": self.iterations,
            "slack_sum": self.slack_sum,
            "converged": self.converged,
            "certified": self.certified,
            "U": self.U.tolist(),
            "mean_states": self.mean_states.tolist(),
            "target_risk": self.target_risk,
            "target_lambdas": {keystr(k): v for k, v in self.target_lambdas.items()},
            "target_margins": {keystr(k): v for k, v in self.target_margins.items()},
            "collision_margins": {keystr(k): v for k, v in self.collision_margins.items()},
            "trace": [vars(t) for t in self.trace],
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d):
        def key(s):
            return tuple(int(p) if p.lstrip("-").isdigit() else p for p in s.split(":"))

        return cls(
            bound=BoundKind.parse(d["bound"]),
            U=np.asarray(d["U"], float),
            mean_states=np.asarray(d["mean_states"], float),
            cost=float(d["cost"]),
            iterations=int(d["iterations"]),
            slack_sum=float(d["slack_sum"]),
            converged=bool(d["converged"]),
            certified=bool(d["certified"]),
            trace=[IterationRecord(**t) for t in d.get("trace", [])],
            target_lambdas={key(k): v for k, v in d.get("target_lambdas", {}).items()},
            target_risk=float(d.get("target_risk", 0.0)),
            target_margins={key(k): v for k, v in d.get("target_margins", {}).items()},
            collision_margins={key(k): v for k, v in d.get("collision_margins", {}).items()},
            scenario_hash=d.get("scenario_hash", ""),
            notes=list(d.get("notes", [])),
        )


def certify(ref: Reformulation, U):
    """Exact feasibility check of inputs ``U`` of shape ``(Nv, N*m)``.

    Returns ``(ok, target_lambdas, target_risk, target_margins, collision_margins)``.
    With optimized target multipliers each row gets the largest multiplier it
    admits, which yields the smallest certified risk total for these inputs.
    """
    kind = ref.kind
    ok = True
    lambdas, margins = {}, {}
    if ref.allocation.optimize_target:
        lam_floor = lambda_for_risk(kind, ref.scenario.alpha)
        risk = 0.0
        for row in ref.targets:
            slack = row.h - row.mean(U[row.vehicle])
            if row.std == 0.0:
                lam = math.inf if slack >= -CERT_TOL else -math.inf
            else:
                lam = slack / row.std
            lambdas[row.key] = lam
            if not lam >= lam_floor:
                ok = False
                margins[row.key] = slack - lam_floor * row.std
                continue
            margins[row.key] = 0.0 if math.isfinite(lam) else slack
            risk += 0.0 if math.isinf(lam) else tail_bound(kind, lam)
        if risk > ref.scenario.alpha:
            ok = False
    else:
        risk = 0.0
        for row in ref.targets:
            lam = ref.allocation.target_lambda(row.key)
            lambdas[row.key] = lam
            margins[row.key] = row.h - row.mean(U[row.vehicle]) - lam * row.std
            risk += ref.allocation.target[row.key]
            if margins[row.key] < -CERT_TOL:
                ok = False
    col = {}
    for row in ref.collisions:
        col[row.key] = exact_dc_row_value(row, U, ref.omega(row), kind)
        if col[row.key] < -CERT_TOL:
            ok = False
    return ok, lambdas, risk, margins, col


def solve_ccp(scenario, allocation=None, config: CcpConfig | None = None, backend=None,
              kind=None) -> PlanSolution:
    """Run the convex-concave procedure on ``scenario``.

    Raises :class:`InfeasibleScenarioError` when the first subproblem (which
    always admits slack on collision rows) has no solution.
    """
    cfg = config or scenario.ccp
    kind = BoundKind.parse(kind or (allocation.kind if allocation else scenario.bound))
    ref = Reformulation.build(scenario, kind, allocation)
    solver = get_backend(backend or cfg.backend)

    U = np.zeros((scenario.Nv, scenario.N * scenario.m))
    lin = LinearizationPoint.at(U, ref.collisions)
    penalty = cfg.penalty0
    trace = []
    notes = []
    prev_cost = None
    converged = False
    slack_sum = 0.0
    for it in range(cfg.max_iters):
        prob = assemble_problem(ref, lin, penalty, cfg.feas_margin)
        res = solver.solve(prob)
        if res.status != OPTIMAL:
            if it == 0:
                raise InfeasibleScenarioError(
                    f"first convex subproblem is {res.status} ({res.info.get('status')}); "
                    "target sets are likely unreachable under the input bounds and bound multipliers")
            notes.append(f"iteration {it}: backend returned {res.status}; keeping previous iterate")
            break
        x = res.x
        U = ref.unstack(x)
        slack_sum = float(np.sum(np.clip(ref.slacks(x), 0.0, None)))
        cost = ref.fuel_cost(U)
        trace.append(IterationRecord(it, cost, res.objective, slack_sum, penalty, res.info.get("status", "")))
        log.debug("ccp iter %d: cost=%.8g slack=%.3g penalty=%.3g", it, cost, slack_sum, penalty)
        lin = LinearizationPoint.at(U, ref.collisions)
        if slack_sum < cfg.slack_tol:
            if not ref.collisions or (prev_cost is not None and abs(cost - prev_cost) < cfg.obj_tol):
                converged = True
                break
        else:
            penalty = min(penalty * cfg.penalty_growth, cfg.penalty_max)
        prev_cost = cost
    else:
        notes.append(f"stopped at max_iters={cfg.max_iters} without meeting the stopping rule")

    ok, lambdas, risk, t_margins, c_margins = certify(ref, U)
    certified = bool(converged and slack_sum < cfg.slack_tol and ok)
    if converged and not ok:
        notes.append("converged but exact re-evaluation found a violated row")
    Nm = scenario.N * scenario.m
    means = np.stack([
        mean_trajectory(ref.cd, scenario.x0[i], U[i], scenario.disturbance.stacked_mean(i))
        for i in range(scenario.Nv)
    ])
    return PlanSolution(
        bound=kind,
        U=U.reshape(scenario.Nv, scenario.N, scenario.m) if Nm else U,
        mean_states=means,
        cost=ref.fuel_cost(U),
        iterations=len(trace),
        slack_sum=slack_sum,
        converged=converged,
        certified=certified,
        trace=trace,
        target_lambdas=lambdas,
        target_risk=risk,
        target_margins=t_margins,
        collision_margins=c_margins,
        scenario_hash=scenario.hash(),
        notes=notes,
    )


@dataclass
class Comparison:
    """Paired runs that differ only in the tail bound."""

    solutions: dict
    errors: dict

    @property
    def cost_delta(self):
        """Cantelli cost minus VP cost (``None`` unless both solved)."""
        vp, ca = self.solutions.get(BoundKind.VP), self.solutions.get(BoundKind.CANTELLI)
        if vp is None or ca is None:
            return None
        return ca.cost - vp.cost


def compare_bounds(scenario, config=None, backend=None) -> Comparison:
    """Solve ``scenario`` under both bounds with the same allocation rule."""
    sols, errs = {}, {}
    for kind in (BoundKind.VP, BoundKind.CANTELLI):
        try:
            sols[kind] = solve_ccp(scenario, config=config, backend=backend, kind=kind)
        except (InfeasibleScenarioError, InfeasibleAllocationError) as exc:
            errs[kind] = str(exc)
        except VpplanError as exc:
            errs[kind] = f"{type(exc).__name__}: {exc}"
    return Comparison(sols, errs)
