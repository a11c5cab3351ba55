"""Deterministic surrogates of the chance constraints.

Target halfspaces become affine rows ``E[g x(k)] + lam * Std[g x(k)] <= h``.
Collision rows ``E||zbar + z||^2 - lam * Std||zbar + z||^2 >= r^2`` are a
difference of convex functions of the inputs; each convex-concave iteration
replaces the expectation term by its tangent at the previous iterate, which
leaves a second-order cone row plus a non-negative slack.

The output of :func:`assemble_problem` is a :class:`ConicProblem`, a small
solver-agnostic description: quadratic objective, affine rows ``A x <= b``,
cone rows ``||F x + g|| <= c^T x + d`` and variable bounds.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .bounds import BoundKind, RiskAllocation, lambda_for_risk, max_risk, tail_bound, uniform_allocation
from .errors import DimensionError, DomainError, InfeasibleAllocationError
from .moments import affine_moments, difference_moments, quadratic_moments

__all__ = [
    "SocRow",
    "ConicProblem",
    "TargetRow",
    "CollisionRow",
    "LinearizationPoint",
    "Reformulation",
    "build_allocation",
    "target_rows",
    "collision_rows",
    "collision_row",
    "exact_dc_row_value",
    "assemble_problem",
]

# Risk grid (as multiples of the budget) for the piecewise-linear upper
# envelope of the tail bound used when target multipliers are optimized.
LAMBDA_GRID_POINTS = 200
LAMBDA_GRID_DECADES = 9


@dataclass(frozen=True)
class SocRow:
    """``||F x + g|| <= c^T x + d``."""

    F: np.ndarray
    g: np.ndarray
    c: np.ndarray
    d: float
    label: object = None

    def __post_init__(self):
        if self.F.shape[0] != self.g.shape[0] or self.F.shape[1] != self.c.shape[0]:
            raise DimensionError("cone row blocks have inconsistent shapes")

    def residual(self, x):
        """``c^T x + d - ||F x + g||``; non-negative when satisfied."""
        return float(self.c @ x + self.d - np.linalg.norm(self.F @ x + self.g))


@dataclass
class ConicProblem:
    """minimize ``0.5 x^T P x + q^T x`` s.t. ``A x <= b``, cone rows, ``lb <= x <= ub``."""

    P: np.ndarray
    q: np.ndarray
    A: np.ndarray
    b: np.ndarray
    socs: list
    lb: np.ndarray
    ub: np.ndarray
    blocks: dict = field(default_factory=dict)
    row_labels: list = field(default_factory=list)

    @property
    def nvar(self):
        return self.q.size

    def objective(self, x):
        return float(0.5 * x @ self.P @ x + self.q @ x)

    def max_violation(self, x):
        v = 0.0
        if self.b.size:
            v = max(v, float(np.max(self.A @ x - self.b)))
        for row in self.socs:
            v = max(v, -row.residual(x))
        v = max(v, float(np.max(self.lb - x, initial=-np.inf)), float(np.max(x - self.ub, initial=-np.inf)))
        return v

    def block(self, x, name):
        return x[self.blocks[name]]


@dataclass(frozen=True)
class TargetRow:
    """One target halfspace at one step, precomputed (independent of inputs).

    ``E[g x(k)] = const + coef @ U_vehicle`` and ``std`` is ``Std[g x(k)]``.
    """

    key: tuple
    vehicle: int
    step: int
    g: np.ndarray
    h: float
    const: float
    coef: np.ndarray
    std: float

    def mean(self, U_vehicle):
        return float(self.const + self.coef @ U_vehicle)


@dataclass(frozen=True)
class CollisionRow:
    """Squared-distance statistic ``||zbar + z||^2`` of a pair or vehicle/obstacle.

    ``zbar = z0 + SC @ (U_i - U_j)`` for pairs and ``z0 + SC @ U_i`` for
    obstacles (``j`` is ``None``). ``z0`` already contains disturbance means.
    """

    key: tuple
    i: int
    j: int | None
    step: int
    z0: np.ndarray
    SC: np.ndarray
    r: float
    qmd: object = field(repr=False)

    def delta(self, U):
        """Relevant input combination from ``U`` of shape ``(Nv, N*m)``."""
        return U[self.i] - U[self.j] if self.j is not None else U[self.i]

    def zbar(self, U):
        return self.z0 + self.SC @ self.delta(U)


@dataclass
class LinearizationPoint:
    """Previous iterate's inputs ``(Nv, N*m)`` and the ``zbar`` they induce per row."""

    U: np.ndarray
    zbar: dict = field(default_factory=dict)

    @classmethod
    def at(cls, U, rows):
        U = np.asarray(U, float)
        return cls(U, {row.key: row.zbar(U) for row in rows})


def target_rows(scenario, cd):
    """All target halfspace rows of the scenario, in canonical key order."""
    spec = scenario.disturbance
    rows = []
    degenerate = []
    for s_idx, ts in enumerate(scenario.targets):
        i = ts.vehicle
        for k in ts.steps:
            free = cd.powers[k] @ scenario.x0[i]
            for j, (g, h) in enumerate(zip(ts.polytope.G, ts.polytope.h)):
                shift, std = affine_moments(g, cd, spec, k, i, allow_degenerate=True)
                if std == 0.0:
                    degenerate.append((i, s_idx, k, j))
                rows.append(TargetRow(
                    key=(i, s_idx, k, j), vehicle=i, step=k, g=g, h=float(h),
                    const=float(g @ free + shift), coef=g @ cd.C[k], std=std))
    if degenerate:
        warnings.warn(f"{len(degenerate)} target rows have zero standard deviation and are "
                      "enforced deterministically", RuntimeWarning, stacklevel=2)
    return rows


def collision_rows(scenario, cd):
    """Vehicle-pair rows followed by vehicle-obstacle rows."""
    spec = scenario.disturbance
    S = scenario.S
    rows = []
    for (i, j) in scenario.pairs:
        diff = difference_moments(spec.stacked(i), spec.stacked(j))
        for k in range(1, scenario.N + 1):
            M = S @ cd.D[k]
            z0 = S @ (cd.powers[k] @ (scenario.x0[i] - scenario.x0[j])) + M @ diff.mean
            rows.append(CollisionRow(("pair", i, j, k), i, j, k, z0, S @ cd.C[k],
                                     scenario.r, quadratic_moments(M, diff)))
    for i in range(scenario.Nv):
        comps = spec.stacked(i)
        for o_idx, obs in enumerate(scenario.obstacles):
            for k in range(1, scenario.N + 1):
                M = S @ cd.D[k]
                z0 = S @ (cd.powers[k] @ scenario.x0[i] - obs.o[k]) + M @ comps.mean
                rows.append(CollisionRow(("obstacle", i, o_idx, k), i, None, k, z0, S @ cd.C[k],
                                         obs.r, quadratic_moments(M, comps)))
    return rows


def build_allocation(scenario, kind=None) -> RiskAllocation:
    """Risk allocation requested by the scenario (uniform, explicit or optimized)."""
    kind = BoundKind.parse(kind or scenario.bound)
    cfg = scenario.allocation

    def split(keys, how, total, name):
        if not keys:
            return {}
        if how == "uniform":
            if total is None:
                raise InfeasibleAllocationError(f"no risk budget for {name} rows")
            omega, _ = uniform_allocation(total, len(keys), kind)
            return dict.fromkeys(keys, omega)
        if len(how) != len(keys):
            raise InfeasibleAllocationError(f"{name} allocation lists {len(how)} risks for {len(keys)} rows")
        return dict(zip(keys, (float(w) for w in how)))

    t_keys = scenario.target_keys()
    target = None if cfg["target"] == "optimize" else split(t_keys, cfg["target"], scenario.alpha, "target")
    alloc = RiskAllocation(
        kind=kind, alpha=scenario.alpha, beta=scenario.beta, gamma=scenario.gamma,
        target=target,
        collision=split(scenario.collision_keys(), cfg["collision"], scenario.gamma, "collision"),
        obstacle=split(scenario.obstacle_keys(), cfg["obstacle"], scenario.beta, "obstacle"),
    )
    if target is not None and any(not 0 < w < max_risk(kind) for w in target.values()):
        raise InfeasibleAllocationError(f"target risk outside the {kind.value} domain")
    alloc.check()
    return alloc


def lambda_envelope(kind, alpha, points=LAMBDA_GRID_POINTS, decades=LAMBDA_GRID_DECADES):
    """Chord lines ``t >= slope * lam + icpt`` over-bounding the tail bound.

    The grid spans risks from ``alpha`` down to ``alpha * 10**-decades``; since
    the bound is convex and decreasing there, the piecewise-linear
    interpolant (the max of its chords) lies above it. Multipliers are capped
    at ``lam_max``, the end of the grid, where the risk is held at
    ``floor = bound(lam_max)``. Returns
    ``(lam_min, lam_max, slopes, intercepts, floor)``.
    """
    kind = BoundKind.parse(kind)
    omegas = alpha * np.logspace(0.0, -decades, points)
    lams = lambda_for_risk(kind, omegas)
    f = tail_bound(kind, lams)
    slopes = np.diff(f) / np.diff(lams)
    intercepts = f[:-1] - slopes * lams[:-1]
    return float(lams[0]), float(lams[-1]), slopes, intercepts, float(f[-1])


def collision_row(row: CollisionRow, omega, kind, lin: LinearizationPoint, layout, margin=0.0):
    """Linearized collision row as a cone row over the stacked variable.

    Encodes::

        lam ||R_var (zbar; 1)|| - [ ||R_exp (zbar_p; 1)||^2
                                   + 2 (zbar_p + E z)^T (zbar - zbar_p) ] <= -r^2 + s

    with ``lam = lambda_for_risk(kind, omega)``.
    """
    if lin is None or row.key not in lin.zbar:
        raise ValueError(f"no linearization point for collision row {row.key}")
    if not 0 < omega < max_risk(kind):
        raise DomainError(f"collision risk {omega} outside the {BoundKind.parse(kind).value} domain")
    lam = lambda_for_risk(kind, omega)
    qmd = row.qmd
    q = qmd.q
    zp = lin.zbar[row.key]
    nvar = layout["nvar"]

    sel = np.zeros((row.SC.shape[1], nvar))  # maps x to the input combination in zbar
    ui = layout["U"][row.i]
    sel[:, ui] = np.eye(ui.stop - ui.start)
    if row.j is not None:
        uj = layout["U"][row.j]
        sel[:, uj] = -np.eye(uj.stop - uj.start)
    zmap = row.SC @ sel  # zbar = z0 + zmap @ x

    Rv = qmd.var_block_sqrt
    F = lam * (Rv[:, :q] @ zmap)
    g = lam * (Rv[:, :q] @ row.z0 + Rv[:, q])

    e_lin = np.linalg.norm(qmd.exp_block_sqrt @ np.append(zp, 1.0)) ** 2
    grad = 2.0 * (zp + qmd.e_z)
    c = grad @ zmap
    c[layout["slack"][row.key]] += 1.0
    d = e_lin + grad @ (row.z0 - zp) - row.r**2 - margin
    return SocRow(F, g, c, float(d), label=row.key)


def exact_dc_row_value(row: CollisionRow, U, omega, kind) -> float:
    """``E||zbar+z||^2 - lam Std||zbar+z||^2 - r^2`` at inputs ``U`` (no linearization)."""
    lam = lambda_for_risk(kind, omega)
    zb = row.zbar(np.asarray(U, float))
    return row.qmd.expected_sq_norm(zb) - lam * row.qmd.std_sq_norm(zb) - row.r**2


@dataclass
class Reformulation:
    """Input-independent data shared by every convex-concave iteration."""

    scenario: object
    cd: object
    allocation: RiskAllocation
    targets: list
    collisions: list
    layout: dict

    @classmethod
    def build(cls, scenario, kind=None, allocation=None):
        kind = BoundKind.parse(kind or scenario.bound)
        cd = scenario.concatenated()
        allocation = allocation or build_allocation(scenario, kind)
        if allocation.kind is not kind:
            raise ValueError("allocation was built for a different bound")
        targets = target_rows(scenario, cd)
        collisions = collision_rows(scenario, cd)

        Nm = scenario.N * scenario.m
        layout = {"U": [], "slack": {}}
        pos = 0
        for _ in range(scenario.Nv):
            layout["U"].append(slice(pos, pos + Nm))
            pos += Nm
        if allocation.optimize_target and targets:
            layout["lam"] = slice(pos, pos + len(targets))
            pos += len(targets)
            layout["risk"] = slice(pos, pos + len(targets))
            pos += len(targets)
        for row in collisions:
            layout["slack"][row.key] = pos
            pos += 1
        layout["nvar"] = pos
        return cls(scenario, cd, allocation, targets, collisions, layout)

    @property
    def kind(self):
        return self.allocation.kind

    def omega(self, row: CollisionRow):
        table = self.allocation.collision if row.j is not None else self.allocation.obstacle
        return table[row.key]

    def unstack(self, x):
        """Inputs ``(Nv, N*m)`` from a stacked primal vector."""
        return np.stack([x[s] for s in self.layout["U"]])

    def slacks(self, x):
        idx = [self.layout["slack"][row.key] for row in self.collisions]
        return np.asarray(x)[idx] if idx else np.zeros(0)

    def fuel_cost(self, U):
        return float(np.sum(np.asarray(U) ** 2))


def assemble_problem(ref: Reformulation, lin: LinearizationPoint, penalty: float, margin: float = 0.0):
    """Convex subproblem at linearization point ``lin``.

    Objective is ``sum_i U_i^T U_i + penalty * sum(slack)``; target rows are
    hard, linearized collision rows carry one slack each.
    """
    sc = ref.scenario
    lay = ref.layout
    nvar = lay["nvar"]
    nU = sc.Nv * sc.N * sc.m

    P = np.zeros((nvar, nvar))
    P[np.arange(nU), np.arange(nU)] = 2.0
    q = np.zeros(nvar)
    lb = np.full(nvar, -np.inf)
    ub = np.full(nvar, np.inf)
    if sc.input_lb is not None:
        for s in lay["U"]:
            lb[s] = np.tile(sc.input_lb, sc.N)
            ub[s] = np.tile(sc.input_ub, sc.N)

    A_rows, b_rows, labels = [], [], []
    optimize = ref.allocation.optimize_target and ref.targets
    if optimize:
        # multipliers are stored in units of lam_min and risks in units of
        # alpha, which keeps the chord rows well scaled for the solver
        lam_min, lam_max, slopes, icpts, floor = lambda_envelope(ref.kind, sc.alpha)
        lam_sl, risk_sl = lay["lam"], lay["risk"]
        lb[lam_sl] = 1.0
        ub[lam_sl] = lam_max / lam_min
        lb[risk_sl] = floor / sc.alpha
    for t_idx, row in enumerate(ref.targets):
        a = np.zeros(nvar)
        a[lay["U"][row.vehicle]] = row.coef
        if optimize:
            a[lam_sl.start + t_idx] = row.std * lam_min
            rhs = row.h - row.const - margin
        else:
            rhs = row.h - row.const - ref.allocation.target_lambda(row.key) * row.std - margin
        A_rows.append(a)
        b_rows.append(rhs)
        labels.append(("target",) + row.key)
    if optimize:
        nT = len(ref.targets)
        G = len(slopes)
        # slope * lam - risk <= -intercept, for every chord and every row
        block = np.zeros((nT * G, nvar))
        rr = np.arange(nT * G)
        t_of = np.repeat(np.arange(nT), G)
        block[rr, lam_sl.start + t_of] = np.tile(slopes * lam_min / sc.alpha, nT)
        block[rr, risk_sl.start + t_of] = -1.0
        A_rows.extend(block)
        b_rows.extend(np.tile(-icpts / sc.alpha, nT))
        labels.extend(("envelope", int(t)) for t in t_of)
        budget = np.zeros(nvar)
        budget[risk_sl] = 1.0
        A_rows.append(budget)
        b_rows.append(1.0 - 1e-9 - margin / sc.alpha)
        labels.append(("target_budget",))

    socs = []
    for row in ref.collisions:
        socs.append(collision_row(row, ref.omega(row), ref.kind, lin, lay, margin))
        s = lay["slack"][row.key]
        q[s] = penalty
        lb[s] = 0.0

    A = np.array(A_rows) if A_rows else np.zeros((0, nvar))
    b = np.array(b_rows, dtype=float)
    blocks = {"U": lay["U"]}
    if optimize:
        blocks["lam"] = lay["lam"]
        blocks["risk"] = lay["risk"]
    return ConicProblem(P, q, A, b, socs, lb, ub, blocks, labels)
