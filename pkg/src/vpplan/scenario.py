"""Scenario documents: parsing, validation and canonical serialization.

A scenario is a JSON object::

    {
      "name": "...", "description": "...",                      # optional
      "dynamics": {"kind": "cwh", "params": {"mu", "R0", "mc"}, "dt", "input_model"}
                | {"kind": "explicit", "matrices": {"A", "B"}, "dt"},
      "horizon": N,
      "input_box": {"lower": [...], "upper": [...]} | null,
      "vehicles": [{"x0": [...], "target": [{"rows": [{"G": [...], "h": h}],
                                             "steps": "terminal" | "all" | [k, ...]}]}],
      "collisions": {"r", "S_diag", "pairs": "all" | [[i, j], ...],
                     "obstacles": [{"o": [...] | [[...] per step], "r"}]} | null,
      "disturbance": {"family": "gaussian" | "exponential" | "gaussian_mixture" | "explicit",
                      "params": {...}},
      "thresholds": {"alpha", "beta", "gamma"},
      "bound": "vp" | "cantelli",
      "allocation": "uniform" | "optimize" | {"target", "collision", "obstacle"},
      "ccp": {...CcpConfig fields...},
      "seed": int
    }

Unknown keys are rejected. :func:`canonical` re-serializes with every default
filled in and keys sorted, so two documents describing the same problem map
to the same string (and the same :func:`scenario_hash`).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .bounds import THRESHOLD_MAX, BoundKind
from .config import CcpConfig
from .dynamics import CwhParams, LtiSystem, build_concatenated, discretize_cwh
from .errors import ScenarioError, VpplanError
from .moments import DisturbanceSpec

__all__ = [
    "Polytope",
    "TargetSet",
    "Obstacle",
    "Scenario",
    "parse_scenario",
    "load_scenario",
    "load_fixture",
    "canonical",
    "scenario_hash",
    "box_rows",
]

FIXTURES = ("exponential_rendezvous", "gaussian_los")


@dataclass(frozen=True)
class Polytope:
    """``{x : G x <= h}``."""

    G: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.G, float))
        h = np.asarray(self.h, float).ravel()
        if G.shape[0] < 1 or G.shape[0] != h.size:
            raise ValueError("polytope needs at least one row and matching offsets")
        if not (np.all(np.isfinite(G)) and np.all(np.isfinite(h))):
            raise ValueError("polytope entries must be finite")
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "h", h)

    def __len__(self):
        return self.G.shape[0]


@dataclass(frozen=True)
class TargetSet:
    vehicle: int
    polytope: Polytope
    steps: tuple


@dataclass(frozen=True)
class Obstacle:
    """Static or moving keep-out ball; ``o[k]`` is the centre at step ``k``."""

    o: np.ndarray
    r: float


@dataclass
class Scenario:
    name: str
    system: LtiSystem
    N: int
    x0: np.ndarray
    targets: list
    input_lb: np.ndarray | None
    input_ub: np.ndarray | None
    S: np.ndarray
    r: float
    pairs: list
    obstacles: list
    disturbance: DisturbanceSpec
    alpha: float | None
    beta: float | None
    gamma: float | None
    bound: BoundKind
    allocation: dict
    ccp: CcpConfig
    seed: int
    doc: dict = field(repr=False)

    @property
    def Nv(self):
        return self.x0.shape[0]

    @property
    def n(self):
        return self.system.n

    @property
    def m(self):
        return self.system.m

    def concatenated(self):
        return build_concatenated(self.system, self.N)

    def target_keys(self):
        """Row keys ``(vehicle, set_index, step, row_index)`` in canonical order."""
        keys = []
        for s_idx, ts in enumerate(self.targets):
            for k in ts.steps:
                for j in range(len(ts.polytope)):
                    keys.append((ts.vehicle, s_idx, k, j))
        return keys

    def collision_keys(self):
        return [("pair", i, j, k) for (i, j) in self.pairs for k in range(1, self.N + 1)]

    def obstacle_keys(self):
        return [("obstacle", i, o, k) for i in range(self.Nv)
                for o in range(len(self.obstacles)) for k in range(1, self.N + 1)]

    def with_bound(self, kind):
        doc = json.loads(json.dumps(self.doc))
        doc["bound"] = BoundKind.parse(kind).value
        return parse_scenario(doc)

    def with_changes(self, **changes):
        """Re-parse with top-level document keys replaced."""
        doc = json.loads(json.dumps(self.doc))
        doc.update(changes)
        return parse_scenario(doc)

    def hash(self):
        return scenario_hash(self.doc)


def box_rows(lower, upper):
    """Halfspace rows ``{"G", "h"}`` of an axis-aligned box (``None`` skips a side)."""
    rows = []
    for i, (lo, hi) in enumerate(zip(lower, upper)):
        e = [0.0] * len(lower)
        if hi is not None:
            e_hi = list(e)
            e_hi[i] = 1.0
            rows.append({"G": e_hi, "h": float(hi)})
        if lo is not None:
            e_lo = list(e)
            e_lo[i] = -1.0
            rows.append({"G": e_lo, "h": -float(lo)})
    return rows


# -- parsing helpers ---------------------------------------------------------

def _obj(d, path, required=(), optional=()):
    if not isinstance(d, dict):
        raise ScenarioError(path, "expected an object")
    unknown = set(d) - set(required) - set(optional)
    if unknown:
        raise ScenarioError(path, f"unknown keys {sorted(unknown)}")
    for key in required:
        if key not in d:
            raise ScenarioError(f"{path}.{key}" if path else key, "missing required field")
    return d


def _num(v, path, positive=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
        raise ScenarioError(path, "expected a finite number")
    if positive and not v > 0:
        raise ScenarioError(path, "must be positive")
    return float(v)


def _int(v, path, minimum=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ScenarioError(path, "expected an integer")
    if minimum is not None and v < minimum:
        raise ScenarioError(path, f"must be at least {minimum}")
    return v


def _vec(v, path, length=None):
    try:
        a = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        raise ScenarioError(path, "expected a list of numbers") from None
    if a.ndim != 1 or not np.all(np.isfinite(a)):
        raise ScenarioError(path, "expected a flat list of finite numbers")
    if length is not None and a.size != length:
        raise ScenarioError(path, f"expected length {length}, got {a.size}")
    return a


def _mat(v, path, shape=None):
    try:
        a = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        raise ScenarioError(path, "expected a matrix (list of rows)") from None
    if a.ndim != 2 or not np.all(np.isfinite(a)):
        raise ScenarioError(path, "expected a rectangular matrix of finite numbers")
    if shape is not None and a.shape != shape:
        raise ScenarioError(path, f"expected shape {shape}, got {a.shape}")
    return a


def _steps(v, path, N):
    if v == "terminal":
        return (N,), "terminal"
    if v == "all":
        return tuple(range(1, N + 1)), "all"
    if not isinstance(v, list) or not v:
        raise ScenarioError(path, "expected 'terminal', 'all' or a non-empty list of steps")
    steps = tuple(sorted({_int(k, f"{path}[{i}]", 1) for i, k in enumerate(v)}))
    if steps[-1] > N:
        raise ScenarioError(path, f"steps must lie in 1..{N}")
    return steps, list(steps)


def _threshold(v, path):
    if v is None:
        return None
    v = _num(v, path)
    if not 0 < v < THRESHOLD_MAX:
        raise ScenarioError(path, f"threshold {v} must lie in (0, 1/6)")
    return v


def _parse_dynamics(d):
    _obj(d, "dynamics", ("kind", "dt"), ("params", "matrices", "input_model"))
    dt = _num(d["dt"], "dynamics.dt", positive=True)
    kind = d["kind"]
    if kind == "cwh":
        p = _obj(d.get("params", {}), "dynamics.params", (), ("mu", "R0", "mc"))
        params = CwhParams(**{k: _num(v, f"dynamics.params.{k}", positive=True) for k, v in p.items()})
        model = d.get("input_model", "impulse")
        if model not in ("impulse", "zoh"):
            raise ScenarioError("dynamics.input_model", "expected 'impulse' or 'zoh'")
        sys = discretize_cwh(params, dt, model)
        doc = {"kind": "cwh", "dt": dt, "input_model": model,
               "params": {"mu": params.mu, "R0": params.R0, "mc": params.mc}}
    elif kind == "explicit":
        if "input_model" in d or "params" in d:
            raise ScenarioError("dynamics", "explicit dynamics take only 'matrices' and 'dt'")
        mats = _obj(d.get("matrices"), "dynamics.matrices", ("A", "B"))
        A = _mat(mats["A"], "dynamics.matrices.A")
        B = _mat(mats["B"], "dynamics.matrices.B")
        try:
            sys = LtiSystem(A, B, dt)
        except VpplanError as exc:
            raise ScenarioError("dynamics.matrices", str(exc)) from None
        doc = {"kind": "explicit", "dt": dt, "matrices": {"A": A.tolist(), "B": B.tolist()}}
    else:
        raise ScenarioError("dynamics.kind", "expected 'cwh' or 'explicit'")
    return sys, doc


def _parse_disturbance(d, Nv, N, n):
    _obj(d, "disturbance", ("family",), ("params",))
    family = d["family"]
    params = d.get("params", {})
    if not isinstance(params, dict):
        raise ScenarioError("disturbance.params", "expected an object")
    allowed = {"gaussian": ({"var"}, {"mean"}),
               "exponential": ({"rate"}, set()),
               "gaussian_mixture": ({"offset", "var"}, set()),
               "explicit": (set(), {"raw", "central"})}
    if family not in allowed:
        raise ScenarioError("disturbance.family", f"unknown family {family!r}")
    req, opt = allowed[family]
    _obj(params, "disturbance.params", tuple(sorted(req)), tuple(sorted(opt)))
    if family == "explicit" and len(params) != 1:
        raise ScenarioError("disturbance.params", "give exactly one of 'raw' or 'central'")
    try:
        spec = DisturbanceSpec.from_family(family, params, Nv, N, n)
    except VpplanError as exc:
        raise ScenarioError("disturbance.params", str(exc)) from None
    doc_params = {k: np.asarray(v, float).tolist() for k, v in params.items()}
    return spec, {"family": family, "params": doc_params}


def _parse_allocation(v, path="allocation"):
    if v in ("uniform", "optimize"):
        return {"target": v, "collision": "uniform", "obstacle": "uniform"}
    _obj(v, path, (), ("target", "collision", "obstacle"))
    out = {"target": "uniform", "collision": "uniform", "obstacle": "uniform"}
    for key, val in v.items():
        if isinstance(val, str):
            ok = ("uniform", "optimize") if key == "target" else ("uniform",)
            if val not in ok:
                raise ScenarioError(f"{path}.{key}", f"expected one of {ok} or a list of risks")
            out[key] = val
        else:
            out[key] = _vec(val, f"{path}.{key}").tolist()
    return out


def parse_scenario(doc) -> Scenario:
    """Validate a scenario document and build the in-memory :class:`Scenario`."""
    _obj(doc, "", ("dynamics", "horizon", "vehicles", "disturbance", "thresholds"),
         ("name", "description", "input_box", "collisions", "bound", "allocation", "ccp", "seed"))
    sys, dyn_doc = _parse_dynamics(doc["dynamics"])
    n, m = sys.n, sys.m
    N = _int(doc["horizon"], "horizon", 1)

    box = doc.get("input_box")
    lb = ub = None
    box_doc = None
    if box is not None:
        _obj(box, "input_box", ("lower", "upper"))
        lb = _vec(box["lower"], "input_box.lower", m)
        ub = _vec(box["upper"], "input_box.upper", m)
        if np.any(lb > ub):
            raise ScenarioError("input_box", "lower bound exceeds upper bound")
        box_doc = {"lower": lb.tolist(), "upper": ub.tolist()}

    vehicles = doc["vehicles"]
    if not isinstance(vehicles, list) or not vehicles:
        raise ScenarioError("vehicles", "expected a non-empty list")
    x0 = []
    targets = []
    veh_doc = []
    for i, v in enumerate(vehicles):
        path = f"vehicles[{i}]"
        _obj(v, path, ("x0",), ("target",))
        x0.append(_vec(v["x0"], f"{path}.x0", n))
        tlist = v.get("target", [])
        if isinstance(tlist, dict):
            tlist = [tlist]
        t_doc = []
        for s, t in enumerate(tlist):
            tpath = f"{path}.target[{s}]"
            _obj(t, tpath, ("rows",), ("steps",))
            rows = t["rows"]
            if not isinstance(rows, list) or not rows:
                raise ScenarioError(f"{tpath}.rows", "expected a non-empty list")
            G, h = [], []
            for j, row in enumerate(rows):
                _obj(row, f"{tpath}.rows[{j}]", ("G", "h"))
                G.append(_vec(row["G"], f"{tpath}.rows[{j}].G", n))
                h.append(_num(row["h"], f"{tpath}.rows[{j}].h"))
            steps, steps_doc = _steps(t.get("steps", "terminal"), f"{tpath}.steps", N)
            targets.append(TargetSet(i, Polytope(np.array(G), np.array(h)), steps))
            t_doc.append({"rows": [{"G": g.tolist(), "h": hh} for g, hh in zip(G, h)],
                          "steps": steps_doc})
        veh_doc.append({"x0": x0[-1].tolist(), "target": t_doc})
    x0 = np.array(x0)
    Nv = len(x0)

    col = doc.get("collisions")
    pairs, obstacles = [], []
    S = np.zeros((0, n))
    r = 0.0
    col_doc = None
    if col is not None:
        _obj(col, "collisions", ("S_diag",), ("r", "pairs", "obstacles"))
        s_diag = _vec(col["S_diag"], "collisions.S_diag", n)
        if np.any(s_diag < 0):
            raise ScenarioError("collisions.S_diag", "selection weights must be non-negative")
        S = np.diag(s_diag)[s_diag != 0]
        if S.shape[0] == 0:
            raise ScenarioError("collisions.S_diag", "selects no state components")
        pv = col.get("pairs", "all")
        if pv == "all":
            pairs = [(a, b) for a in range(Nv) for b in range(a + 1, Nv)]
            pairs_doc = "all"
        else:
            if not isinstance(pv, list):
                raise ScenarioError("collisions.pairs", "expected 'all' or a list of [i, j]")
            for idx, p in enumerate(pv):
                if (not isinstance(p, list) or len(p) != 2
                        or not all(isinstance(x, int) and not isinstance(x, bool) for x in p)):
                    raise ScenarioError(f"collisions.pairs[{idx}]", "expected [i, j]")
                a, b = p
                if not 0 <= a < b < Nv:
                    raise ScenarioError(f"collisions.pairs[{idx}]", f"need 0 <= i < j < {Nv}")
                pairs.append((a, b))
            pairs = sorted(set(pairs))
            pairs_doc = [list(p) for p in pairs]
        if pairs:
            if "r" not in col:
                raise ScenarioError("collisions.r", "missing required field")
            r = _num(col["r"], "collisions.r", positive=True)
        obs_doc = []
        for idx, o in enumerate(col.get("obstacles", [])):
            opath = f"collisions.obstacles[{idx}]"
            _obj(o, opath, ("o", "r"))
            arr = np.asarray(o["o"], float)
            if arr.ndim == 1:
                arr = _vec(o["o"], f"{opath}.o", n)
                traj = np.tile(arr, (N + 1, 1))
            else:
                arr = _mat(o["o"], f"{opath}.o", (N, n))
                traj = np.vstack([arr[:1], arr])  # row k holds o(k); row 0 unused
            obstacles.append(Obstacle(traj, _num(o["r"], f"{opath}.r", positive=True)))
            obs_doc.append({"o": arr.tolist(), "r": float(o["r"])})
        col_doc = {"S_diag": s_diag.tolist(), "pairs": pairs_doc, "obstacles": obs_doc}
        if pairs:
            col_doc["r"] = r

    spec, dist_doc = _parse_disturbance(doc["disturbance"], Nv, N, n)

    th = _obj(doc["thresholds"], "thresholds", (), ("alpha", "beta", "gamma"))
    alpha = _threshold(th.get("alpha"), "thresholds.alpha")
    beta = _threshold(th.get("beta"), "thresholds.beta")
    gamma = _threshold(th.get("gamma"), "thresholds.gamma")
    if targets and alpha is None:
        raise ScenarioError("thresholds.alpha", "required when target sets are given")
    if pairs and gamma is None:
        raise ScenarioError("thresholds.gamma", "required when vehicle pairs are constrained")
    if obstacles and beta is None:
        raise ScenarioError("thresholds.beta", "required when obstacles are given")

    try:
        bound = BoundKind.parse(doc.get("bound", "vp"))
    except VpplanError as exc:
        raise ScenarioError("bound", str(exc)) from None
    allocation = _parse_allocation(doc.get("allocation", "uniform"))
    try:
        ccp = CcpConfig.from_dict(doc.get("ccp"))
    except (VpplanError, TypeError) as exc:
        raise ScenarioError("ccp", str(exc)) from None
    seed = _int(doc.get("seed", 0), "seed", 0)

    canon = {
        "name": str(doc.get("name", "")),
        "description": str(doc.get("description", "")),
        "dynamics": dyn_doc,
        "horizon": N,
        "input_box": box_doc,
        "vehicles": veh_doc,
        "collisions": col_doc,
        "disturbance": dist_doc,
        "thresholds": {"alpha": alpha, "beta": beta, "gamma": gamma},
        "bound": bound.value,
        "allocation": allocation,
        "ccp": ccp.to_dict(),
        "seed": seed,
    }
    return Scenario(
        name=canon["name"], system=sys, N=N, x0=x0, targets=targets,
        input_lb=lb, input_ub=ub, S=S, r=r, pairs=pairs, obstacles=obstacles,
        disturbance=spec, alpha=alpha, beta=beta, gamma=gamma, bound=bound,
        allocation=allocation, ccp=ccp, seed=seed, doc=canon,
    )


def canonical(doc_or_scenario) -> str:
    """Canonical JSON text (defaults filled, keys sorted, compact)."""
    sc = doc_or_scenario if isinstance(doc_or_scenario, Scenario) else parse_scenario(doc_or_scenario)
    return json.dumps(sc.doc, sort_keys=True, separators=(",", ":"))


def scenario_hash(doc_or_scenario) -> str:
    return hashlib.sha256(canonical(doc_or_scenario).encode("utf-8")).hexdigest()


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioError("", f"{path} is not valid JSON: {exc}") from None
    return parse_scenario(doc)


def fixture_path(name):
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; available: {FIXTURES}")
    return resources.files("vpplan") / "fixtures" / f"{name}.json"


def load_fixture(name) -> Scenario:
    """Load a bundled scenario (``exponential_rendezvous`` or ``gaussian_los``)."""
    return parse_scenario(json.loads(fixture_path(name).read_text(encoding="utf-8")))
