"""Empirical unimodality check from a piecewise-linear fit of the ECDF.

The ECDF is covered greedily by chords: from each anchor the fit extends to
the farthest later point whose chord stays within ``xi`` (vertically) of every
point it spans. A unimodal CDF is convex then concave, so the chord slopes
must rise to a single peak and then fall.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError

__all__ = [
    "EcdfPoints",
    "UnimodalityConfig",
    "ecdf",
    "default_xi",
    "fit_segments",
    "slopes_unimodal",
    "check_unimodal",
    "constraint_statistics",
    "validate_constraint_unimodality",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EcdfPoints:
    """Sorted samples ``x`` with ECDF heights ``F = (1..Ns) / Ns``."""

    x: np.ndarray
    F: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, float)
        F = np.asarray(self.F, float)
        if x.ndim != 1 or x.shape != F.shape or x.size < 2:
            raise InvalidParameterError("ECDF needs at least two points with matching heights")
        if np.any(np.diff(x) < 0) or np.any(np.diff(F) <= 0):
            raise InvalidParameterError("ECDF abscissae must be sorted and heights strictly increasing")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "F", F)

    def __len__(self):
        return self.x.size

    def distinct(self):
        """Points with tied abscissae merged, keeping the top height of each tie."""
        last = np.append(np.diff(self.x) > 0, True)
        return self.x[last], self.F[last]


def default_xi(Ns, confidence=0.99):
    """Twice the DKW band half-width ``sqrt(ln(2/(1-confidence)) / (2 Ns))``."""
    return 2.0 * math.sqrt(math.log(2.0 / (1.0 - confidence)) / (2.0 * Ns))


@dataclass(frozen=True)
class UnimodalityConfig:
    """``xi`` is the chord tolerance; ``None`` picks :func:`default_xi` per sample size."""

    xi: float | None = None
    min_samples: int = 10_000

    def __post_init__(self):
        if self.xi is not None and not self.xi > 0:
            raise InvalidParameterError("xi must be positive")
        if self.min_samples < 2:
            raise InvalidParameterError("min_samples must be at least 2")

    def xi_for(self, Ns):
        return self.xi if self.xi is not None else default_xi(Ns)


def ecdf(samples) -> EcdfPoints:
    x = np.sort(np.asarray(samples, float).ravel())
    if x.size < 2:
        raise InvalidParameterError("need at least two samples for an ECDF")
    if not np.all(np.isfinite(x)):
        raise InvalidParameterError("samples must be finite")
    return EcdfPoints(x, np.arange(1, x.size + 1) / x.size)


def fit_segments(points: EcdfPoints, xi: float):
    """Greedy chord fit; returns ``(breakpoint indices, slopes)`` on the distinct points.

    A chord from anchor ``i`` to ``j`` is admissible when every point ``k``
    strictly between them satisfies ``|F_k - chord(x_k)| <= xi``, i.e. the
    chord slope lies in ``[(F_k - F_i - xi) / (x_k - x_i), (F_k - F_i + xi) / (x_k - x_i)]``
    for all such ``k``. Running extrema of those intervals make the search
    linear per anchor.
    """
    if not xi > 0:
        raise InvalidParameterError("xi must be positive")
    x, F = points.distinct()
    n = x.size
    if n < 2:
        return np.array([0]), np.zeros(0)
    breaks = [0]
    slopes = []
    i = 0
    while i < n - 1:
        dx = x[i + 1:] - x[i]
        dF = F[i + 1:] - F[i]
        s = dF / dx
        lo = np.maximum.accumulate((dF - xi) / dx)
        hi = np.minimum.accumulate((dF + xi) / dx)
        # candidate j = i+1+t is admissible iff s[t] within bounds of points before it
        ok = np.ones(s.size, bool)
        ok[1:] = (s[1:] >= lo[:-1]) & (s[1:] <= hi[:-1])
        t = int(np.flatnonzero(ok)[-1])
        slopes.append(float(s[t]))
        i = i + 1 + t
        breaks.append(i)
    return np.array(breaks), np.array(slopes)


def slopes_unimodal(slopes) -> bool:
    """True iff the slopes never rise again once they have fallen."""
    falling = False
    for prev, cur in zip(slopes[:-1], slopes[1:]):
        if cur < prev:
            falling = True
        elif falling:
            return False
    return True


def check_unimodal(points: EcdfPoints, cfg: UnimodalityConfig | None = None) -> bool:
    cfg = cfg or UnimodalityConfig()
    if len(points) < cfg.min_samples:
        log.info("unimodality check on %d samples (< %d recommended)", len(points), cfg.min_samples)
    _, slopes = fit_segments(points, cfg.xi_for(len(points)))
    if slopes.size < 3:
        log.info("only %d chord segments; too coarse to refute unimodality", slopes.size)
        return True
    return slopes_unimodal(slopes)


def constraint_statistics(solution, scenario, batch):
    """Scalar statistic of every constraint row for each sample.

    Target rows give ``g x_i(k)``; pair rows ``||S (x_i(k) - x_j(k))||^2``;
    obstacle rows ``||S (x_i(k) - o(k))||^2``. Returns ``{key: (Ns,) array}``.
    """
    from .validation import propagate

    X = propagate(solution, scenario, batch)  # (Ns, Nv, N+1, n)
    stats = {}
    for s_idx, ts in enumerate(scenario.targets):
        for k in ts.steps:
            vals = X[:, ts.vehicle, k, :] @ ts.polytope.G.T
            for j in range(len(ts.polytope)):
                stats[(ts.vehicle, s_idx, k, j)] = vals[:, j]
    S = scenario.S
    for (i, j) in scenario.pairs:
        for k in range(1, scenario.N + 1):
            d = (X[:, i, k, :] - X[:, j, k, :]) @ S.T
            stats[("pair", i, j, k)] = np.einsum("ij,ij->i", d, d)
    for i in range(scenario.Nv):
        for o_idx, obs in enumerate(scenario.obstacles):
            for k in range(1, scenario.N + 1):
                d = (X[:, i, k, :] - obs.o[k]) @ S.T
                stats[("obstacle", i, o_idx, k)] = np.einsum("ij,ij->i", d, d)
    return stats


def validate_constraint_unimodality(solution, scenario, Ns=50_000, seed=0, cfg=None, spec=None):
    """Run :func:`check_unimodal` on each constraint statistic of a plan.

    Samples ``Ns`` disturbance draws from ``spec`` (default: the scenario's)
    and returns ``{row key: bool}``. A statistic that is constant across the
    samples (zero variance) is reported unimodal.
    """
    from .validation import sample_disturbances

    batch = sample_disturbances(spec or scenario.disturbance, Ns, seed)
    cfg = cfg or UnimodalityConfig()
    out = {}
    for key, vals in constraint_statistics(solution, scenario, batch).items():
        if np.ptp(vals) == 0.0:
            out[key] = True
            continue
        out[key] = check_unimodal(ecdf(vals), cfg)
    return out
