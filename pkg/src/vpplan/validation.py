"""Monte Carlo sampling and empirical constraint satisfaction."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, NotSamplableError

__all__ = [
    "SampleBatch",
    "SatisfactionReport",
    "sample_disturbances",
    "propagate",
    "measure_satisfaction",
    "binomial_se",
]


@dataclass(frozen=True)
class SampleBatch:
    """``W`` has shape ``(Ns, Nv, N, n)``: one disturbance draw per row."""

    seed: int | None
    W: np.ndarray

    @property
    def Ns(self):
        return self.W.shape[0]

    def stacked(self):
        """``(Ns, Nv, N*n)`` view matching the concatenated dynamics."""
        Ns, Nv, N, n = self.W.shape
        return self.W.reshape(Ns, Nv, N * n)

    @classmethod
    def zeros(cls, Ns, Nv, N, n):
        return cls(None, np.zeros((Ns, Nv, N, n)))


def sample_disturbances(spec, Ns, seed=None) -> SampleBatch:
    """Independent draws from the family that produced ``spec``.

    Gaussian components use the tabulated mean and variance; exponential
    components are ``Exp(rate)`` with ``rate = 1 / mean``; the Gaussian
    mixture picks ``-offset`` or ``+offset`` with equal probability and adds
    ``N(0, var)``. Explicit moment tables cannot be sampled.
    """
    if not spec.samplable:
        raise NotSamplableError(f"disturbance family {spec.family!r} has no sampler")
    Ns = int(Ns)
    if Ns < 1:
        raise ValueError("Ns must be positive")
    rng = np.random.default_rng(seed)
    mom = spec.moments
    shape = (Ns,) + spec.shape
    mean = np.asarray(mom.mean)
    if spec.family == "gaussian":
        W = mean + np.sqrt(np.asarray(mom.var)) * rng.standard_normal(shape)
    elif spec.family == "exponential":
        W = rng.exponential(1.0, shape) * mean
    else:
        n = shape[-1]
        d = np.broadcast_to(np.asarray(spec.params["offset"], float), (n,))
        v = np.broadcast_to(np.asarray(spec.params["var"], float), (n,))
        sign = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
        W = sign * d + np.sqrt(v) * rng.standard_normal(shape)
    return SampleBatch(seed, W)


def propagate(solution, scenario, batch: SampleBatch):
    """Sampled trajectories ``(Ns, Nv, N+1, n)`` under the plan's inputs."""
    if batch.W.shape[1:] != (scenario.Nv, scenario.N, scenario.n):
        raise DimensionError(f"batch shape {batch.W.shape[1:]} does not match the scenario")
    cd = scenario.concatenated()
    U = np.asarray(solution.U, float).reshape(scenario.Nv, scenario.N * scenario.m)
    nominal = np.einsum("kab,vb->vka", cd.powers, scenario.x0) + np.einsum("kab,vb->vka", cd.C, U)
    return nominal[None] + np.einsum("kab,svb->svka", cd.D, batch.stacked())


def binomial_se(p, Ns):
    return math.sqrt(p * (1.0 - p) / Ns)


@dataclass
class SatisfactionReport:
    """Empirical probabilities of the joint events and of each row.

    ``joint`` maps ``"target" | "collision" | "obstacle"`` to the fraction of
    samples on which every row of that group holds; ``required`` is the
    nominal level ``1 - threshold``; ``passed`` compares ``joint`` with
    ``required - 3 * binomial standard error``.
    """

    Ns: int
    seed: int | None
    joint: dict
    required: dict
    passed: dict
    marginal: dict = field(default_factory=dict)
    violations: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    @property
    def ok(self):
        return all(self.passed.values())

    def to_dict(self):
        def keystr(k):
            return ":".join(str(p) for p in k)

        return {
            "Ns": self.Ns,
            "seed": self.seed,
            "joint": self.joint,
            "required": self.required,
            "passed": self.passed,
            "ok": self.ok,
            "marginal": {keystr(k): v for k, v in self.marginal.items()},
            "violations": {keystr(k): v for k, v in self.violations.items()},
            "warnings": list(self.warnings),
        }


def measure_satisfaction(solution, scenario, batch: SampleBatch) -> SatisfactionReport:
    X = propagate(solution, scenario, batch)
    Ns = batch.Ns
    held = {}
    for s_idx, ts in enumerate(scenario.targets):
        for k in ts.steps:
            ok = X[:, ts.vehicle, k, :] @ ts.polytope.G.T <= ts.polytope.h
            for j in range(len(ts.polytope)):
                held[(ts.vehicle, s_idx, k, j)] = ok[:, j]
    S = scenario.S
    for (i, j) in scenario.pairs:
        for k in range(1, scenario.N + 1):
            d = (X[:, i, k, :] - X[:, j, k, :]) @ S.T
            held[("pair", i, j, k)] = np.linalg.norm(d, axis=1) >= scenario.r
    for i in range(scenario.Nv):
        for o_idx, obs in enumerate(scenario.obstacles):
            for k in range(1, scenario.N + 1):
                d = (X[:, i, k, :] - obs.o[k]) @ S.T
                held[("obstacle", i, o_idx, k)] = np.linalg.norm(d, axis=1) >= obs.r

    groups = {"target": ("alpha", lambda key: not isinstance(key[0], str)),
              "collision": ("gamma", lambda key: key[0] == "pair"),
              "obstacle": ("beta", lambda key: key[0] == "obstacle")}
    joint, required, passed = {}, {}, {}
    notes = []
    for name, (th_name, member) in groups.items():
        keys = [k for k in held if member(k)]
        if not keys:
            continue
        all_ok = np.logical_and.reduce([held[k] for k in keys])
        p = float(np.mean(all_ok))
        level = 1.0 - getattr(scenario, th_name)
        se = binomial_se(level, Ns)
        joint[name] = p
        required[name] = level
        passed[name] = bool(p >= level - 3.0 * se)
        if 3.0 * se > 1.0 - level:
            notes.append(f"{name}: Ns={Ns} gives a 3-sigma band ({3 * se:.3g}) wider than the "
                         f"violation budget ({1 - level:.3g}); the check has little power")
    for msg in notes:
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    marginal = {k: float(np.mean(v)) for k, v in held.items()}
    violations = {k: int(Ns - np.count_nonzero(v)) for k, v in held.items()}
    return SatisfactionReport(Ns, batch.seed, joint, required, passed, marginal, violations, notes)
