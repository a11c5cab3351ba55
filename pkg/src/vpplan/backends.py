"""Conic solver backends for :class:`~vpplan.reformulate.ConicProblem`.

Every backend turns the problem into the standard form

    minimize 0.5 x^T P x + q^T x   s.t.   G x + s = h,  s in K

with ``K`` a product of a non-negative orthant (affine rows and finite
variable bounds) and one second-order cone per cone row. Select a backend by
name with :func:`get_backend`; the ``VPPLAN_BACKEND`` environment variable
sets the default.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import SolverFailure

__all__ = ["SolveResult", "ClarabelBackend", "CvxoptBackend", "get_backend", "BACKENDS"]

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
FAILED = "numerical-failure"


@dataclass
class SolveResult:
    status: str
    x: np.ndarray | None
    objective: float | None
    info: dict = field(default_factory=dict)


def standard_form(prob):
    """Stack ``(G, h, n_orthant, soc_dims)`` for ``G x + s = h``."""
    nvar = prob.nvar
    G_parts, h_parts = [], []
    if prob.b.size:
        G_parts.append(prob.A)
        h_parts.append(prob.b)
    eye = np.eye(nvar)
    fin_ub = np.isfinite(prob.ub)
    fin_lb = np.isfinite(prob.lb)
    if fin_ub.any():
        G_parts.append(eye[fin_ub])
        h_parts.append(prob.ub[fin_ub])
    if fin_lb.any():
        G_parts.append(-eye[fin_lb])
        h_parts.append(-prob.lb[fin_lb])
    n_orth = sum(p.shape[0] for p in G_parts)
    soc_dims = []
    for row in prob.socs:
        # s = (c^T x + d, F x + g) in the cone  <=>  G = -[c^T; F], h = [d; g]
        G_parts.append(-np.vstack([row.c[None, :], row.F]))
        h_parts.append(np.concatenate([[row.d], row.g]))
        soc_dims.append(1 + row.F.shape[0])
    G = np.vstack(G_parts) if G_parts else np.zeros((0, nvar))
    h = np.concatenate(h_parts) if h_parts else np.zeros(0)
    return G, h, n_orth, soc_dims


class ClarabelBackend:
    """Interior-point conic solve with Clarabel.

    Ruiz equilibration is off and static regularization is reduced by
    default: with optimized target multipliers the chord rows are nearly
    parallel, and the default settings stall short of the requested accuracy
    there. ``settings`` overrides any ``clarabel.DefaultSettings`` field.
    """

    name = "clarabel"

    def __init__(self, tol=1e-10, max_iter=200, **settings):
        self.tol = tol
        self.max_iter = max_iter
        self.settings = {"equilibrate_enable": False, "static_regularization_constant": 1e-12}
        self.settings.update(settings)

    def solve(self, prob) -> SolveResult:
        import clarabel

        G, h, n_orth, soc_dims = standard_form(prob)
        P = sparse.triu(sparse.csc_matrix(prob.P), format="csc")
        cones = []
        if n_orth:
            cones.append(clarabel.NonnegativeConeT(n_orth))
        cones.extend(clarabel.SecondOrderConeT(d) for d in soc_dims)
        settings = clarabel.DefaultSettings()
        settings.verbose = False
        settings.max_iter = self.max_iter
        settings.tol_gap_abs = self.tol
        settings.tol_gap_rel = self.tol
        settings.tol_feas = self.tol
        settings.tol_ktratio = 1e-8
        for key, value in self.settings.items():
            setattr(settings, key, value)
        solver = clarabel.DefaultSolver(P, prob.q, sparse.csc_matrix(G), h, cones, settings)
        sol = solver.solve()
        status = str(sol.status)
        info = {"status": status, "iterations": sol.iterations, "solve_time": sol.solve_time}
        if status in ("Solved", "AlmostSolved"):
            x = np.array(sol.x)
            return SolveResult(OPTIMAL, x, prob.objective(x), info)
        if "Infeasible" in status:
            return SolveResult(INFEASIBLE, None, None, info)
        return SolveResult(FAILED, None, None, info)


class CvxoptBackend:
    """Interior-point conic QP with CVXOPT's ``coneqp``."""

    name = "cvxopt"

    def __init__(self, tol=1e-10, max_iter=200):
        self.tol = tol
        self.max_iter = max_iter

    def solve(self, prob) -> SolveResult:
        import cvxopt
        from cvxopt import solvers

        G, h, n_orth, soc_dims = standard_form(prob)
        opts = {"show_progress": False, "abstol": self.tol, "reltol": self.tol,
                "feastol": self.tol, "maxiters": self.max_iter}
        res = solvers.coneqp(cvxopt.matrix(prob.P), cvxopt.matrix(prob.q),
                             cvxopt.matrix(G), cvxopt.matrix(h),
                             dims={"l": n_orth, "q": soc_dims, "s": []}, options=opts)
        info = {"status": res["status"], "iterations": res["iterations"]}
        if res["status"] == "optimal" or (res["status"] == "unknown" and res["x"] is not None
                                          and res.get("primal infeasibility", 1) < 1e-7):
            x = np.array(res["x"]).ravel()
            return SolveResult(OPTIMAL, x, prob.objective(x), info)
        if res["status"] == "unknown" and res.get("primal infeasibility") is not None \
                and res["primal infeasibility"] > 1e-3:
            return SolveResult(INFEASIBLE, None, None, info)
        return SolveResult(FAILED, None, None, info)


BACKENDS = {"clarabel": ClarabelBackend, "cvxopt": CvxoptBackend}


def get_backend(backend=None):
    """Backend instance from a name, an instance, or ``$VPPLAN_BACKEND`` (default clarabel)."""
    if backend is None:
        backend = os.environ.get("VPPLAN_BACKEND", "clarabel")
    if isinstance(backend, str):
        try:
            return BACKENDS[backend.lower()]()
        except KeyError:
            raise SolverFailure(f"unknown backend {backend!r}; choose from {sorted(BACKENDS)}") from None
    if not hasattr(backend, "solve"):
        raise SolverFailure("backend must provide a solve(problem) method")
    return backend
