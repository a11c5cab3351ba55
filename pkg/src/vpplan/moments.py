"""Disturbance moments and their propagation through the stacked dynamics.

Disturbance components are independent (across vehicles, steps and state
components) and described by their mean and central moments of order 2-4.
Everything downstream needs only:

* the mean and standard deviation of affine statistics ``g x(k)``;
* the mean and variance of squared norms ``||zbar + z||^2`` where
  ``z = M w`` is a linear image of centered disturbance components.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateDistributionError,
    DimensionError,
    InvalidParameterError,
    NotPSDError,
    VpplanError,
)

__all__ = [
    "ComponentMoments",
    "DisturbanceSpec",
    "QuadraticMomentData",
    "exponential_raw_moment",
    "centered_moments",
    "difference_moments",
    "affine_moments",
    "quadratic_moments",
    "psd_sqrt",
    "PSD_TOL",
]

PSD_TOL = 1e-10


@dataclass(frozen=True)
class ComponentMoments:
    """Mean and central moments of one component, or of an array of them.

    Fields may be scalars or equally shaped arrays; arithmetic is elementwise.
    """

    mean: np.ndarray
    var: np.ndarray
    c3: np.ndarray
    c4: np.ndarray

    def __post_init__(self):
        arrs = np.broadcast_arrays(*(np.asarray(getattr(self, f), dtype=float)
                                     for f in ("mean", "var", "c3", "c4")))
        for name, a in zip(("mean", "var", "c3", "c4"), arrs):
            if not np.all(np.isfinite(a)):
                raise InvalidParameterError(f"moment {name} must be finite")
            object.__setattr__(self, name, a if a.ndim else float(a))
        var, c4 = np.asarray(self.var), np.asarray(self.c4)
        if np.any(var <= 0):
            raise DegenerateDistributionError("central second moment must be positive")
        if np.any(c4 < var**2 * (1 - 1e-12)):
            raise InvalidParameterError("fourth central moment below squared variance")

    @property
    def std(self):
        return np.sqrt(self.var)

    def __getitem__(self, idx):
        return ComponentMoments(*(np.asarray(getattr(self, f))[idx]
                                  for f in ("mean", "var", "c3", "c4")))


def exponential_raw_moment(rate: float, order: int) -> float:
    """``E[x^n] = n! / rate^n`` for ``x ~ Exp(rate)``."""
    if not rate > 0:
        raise InvalidParameterError(f"exponential rate must be positive, got {rate}")
    if int(order) != order or not 1 <= order <= 4:
        raise InvalidParameterError(f"order must be an integer in 1..4, got {order}")
    return math.factorial(int(order)) / rate**order


def centered_moments(raw) -> ComponentMoments:
    """Convert raw moments ``(m1, m2, m3, m4)`` (last axis) to central ones."""
    raw = np.asarray(raw, dtype=float)
    if raw.shape[-1] != 4:
        raise DimensionError("raw moments need four entries on the last axis")
    m1, m2, m3, m4 = np.moveaxis(raw, -1, 0)
    var = m2 - m1**2
    if np.any(var <= 0):
        raise DegenerateDistributionError("raw moments give non-positive variance")
    c3 = m3 - 3 * m1 * m2 + 2 * m1**3
    c4 = m4 - 4 * m1 * m3 + 6 * m1**2 * m2 - 3 * m1**4
    return ComponentMoments(m1, var, c3, c4)


def difference_moments(a: ComponentMoments, b: ComponentMoments) -> ComponentMoments:
    """Moments of ``a - b`` for independent ``a`` and ``b``."""
    return ComponentMoments(
        np.subtract(a.mean, b.mean),
        np.add(a.var, b.var),
        np.subtract(a.c3, b.c3),
        np.asarray(a.c4) + np.asarray(b.c4) + 6 * np.asarray(a.var) * np.asarray(b.var),
    )


def _family_moments(family, params, n):
    if family == "gaussian":
        mean = np.broadcast_to(np.asarray(params.get("mean", 0.0), float), (n,))
        var = np.broadcast_to(np.asarray(params["var"], float), (n,))
        return ComponentMoments(mean, var, np.zeros(n), 3 * var**2)
    if family == "exponential":
        rate = np.broadcast_to(np.asarray(params["rate"], float), (n,))
        if np.any(rate <= 0):
            raise InvalidParameterError("exponential rates must be positive")
        raw = np.stack([[exponential_raw_moment(r, p) for p in range(1, 5)] for r in rate])
        return centered_moments(raw)
    if family == "gaussian_mixture":
        # equal-weight mixture of N(-offset, var) and N(+offset, var)
        d = np.broadcast_to(np.asarray(params["offset"], float), (n,))
        v = np.broadcast_to(np.asarray(params["var"], float), (n,))
        return ComponentMoments(np.zeros(n), d**2 + v, np.zeros(n), d**4 + 6 * d**2 * v + 3 * v**2)
    if family == "explicit":
        if "central" in params:
            c = np.asarray(params["central"], float)
            return ComponentMoments(c[..., 0], c[..., 1], c[..., 2], c[..., 3])
        if "raw" in params:
            return centered_moments(params["raw"])
        raise InvalidParameterError("explicit moments need a 'raw' or 'central' table")
    raise InvalidParameterError(f"unknown disturbance family {family!r}")


@dataclass(frozen=True)
class DisturbanceSpec:
    """Per-vehicle, per-step, per-component disturbance moments.

    ``moments`` arrays have shape ``(Nv, N, n)``. ``family`` and ``params``
    record how the moments were produced, which is what the sampler uses.
    """

    moments: ComponentMoments
    family: str = "explicit"
    params: dict = field(default_factory=dict)

    @classmethod
    def from_family(cls, family, params, Nv, N, n):
        shape = (Nv, N, n)
        try:
            comp = _family_moments(family, params, n)
        except ValueError as exc:
            if isinstance(exc, VpplanError):
                raise
            raise DimensionError(f"{family} parameters do not broadcast to {n} components") from exc
        try:
            full = ComponentMoments(*(np.broadcast_to(np.asarray(getattr(comp, f)), shape).copy()
                                      for f in ("mean", "var", "c3", "c4")))
        except ValueError as exc:
            raise DimensionError(f"moment table does not broadcast to {shape}") from exc
        return cls(full, family, dict(params))

    @classmethod
    def gaussian(cls, var, Nv, N, mean=0.0):
        var = np.asarray(var, float)
        return cls.from_family("gaussian", {"mean": mean, "var": var}, Nv, N, var.shape[-1])

    @classmethod
    def exponential(cls, rate, Nv, N):
        rate = np.asarray(rate, float)
        return cls.from_family("exponential", {"rate": rate}, Nv, N, rate.shape[-1])

    @property
    def shape(self):
        return np.shape(self.moments.var)

    @property
    def samplable(self):
        return self.family in ("gaussian", "exponential", "gaussian_mixture")

    def stacked(self, vehicle) -> ComponentMoments:
        """Moments of ``W_i`` flattened to length ``N*n`` (step-major)."""
        return ComponentMoments(*(np.asarray(getattr(self.moments, f))[vehicle].ravel()
                                  for f in ("mean", "var", "c3", "c4")))

    def stacked_mean(self, vehicle):
        return np.asarray(self.moments.mean)[vehicle].ravel()

    def stacked_var(self, vehicle):
        return np.asarray(self.moments.var)[vehicle].ravel()


def affine_moments(g, cd, spec: DisturbanceSpec, k: int, vehicle: int, allow_degenerate=False):
    """Disturbance contribution to ``g x(k)``: its mean shift and standard deviation.

    Returns ``(g D(k) E[W], sqrt(g D(k) Var[W] D(k)^T g^T))``. The standard
    deviation does not depend on the inputs.
    """
    g = np.asarray(g, dtype=float).ravel()
    if g.shape != (cd.n,):
        raise DimensionError(f"row must have length {cd.n}")
    gD = g @ cd.D[k]
    shift = float(gD @ spec.stacked_mean(vehicle))
    std = float(np.sqrt(np.sum(gD**2 * spec.stacked_var(vehicle))))
    if std == 0.0 and not allow_degenerate:
        raise DegenerateDistributionError(f"statistic at step {k} has zero standard deviation")
    return shift, std


def psd_sqrt(M, tol=PSD_TOL):
    """Symmetric square root of a PSD matrix, clipping tiny negative eigenvalues.

    Eigenvalues below ``-tol * max(1, max|eig|)`` raise :class:`NotPSDError`.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError("psd_sqrt expects a square matrix")
    Ms = 0.5 * (M + M.T)
    if not np.allclose(Ms, M, rtol=1e-10, atol=1e-12 * max(1.0, np.abs(M).max(initial=0.0))):
        raise NotPSDError("matrix is not symmetric")
    w, V = np.linalg.eigh(Ms)
    scale = max(1.0, float(np.abs(w).max(initial=0.0)))
    if w.size and w.min() < -tol * scale:
        raise NotPSDError(f"smallest eigenvalue {w.min():.3e} is clearly negative")
    w = np.clip(w, 0.0, None)
    R = (V * np.sqrt(w)) @ V.T
    return 0.5 * (R + R.T)


@dataclass(frozen=True)
class QuadraticMomentData:
    """Moments of ``z = M w`` and of ``z^T z`` for centered, independent ``w``.

    Also carries the square roots of the two block matrices that write
    ``E||zbar + z||^2`` and ``Std[||zbar + z||^2]`` as norms of ``(zbar, 1)``.
    """

    M: np.ndarray = field(repr=False)
    comp_var: np.ndarray = field(repr=False)
    var_z: np.ndarray
    e_ztz: float
    var_ztz: float
    cov_z_ztz: np.ndarray
    exp_block_sqrt: np.ndarray = field(repr=False)
    var_block_sqrt: np.ndarray = field(repr=False)

    @property
    def q(self):
        return self.var_z.shape[0]

    @property
    def e_z(self):
        return np.zeros(self.q)

    @property
    def a(self):
        """Gram matrix ``M^T M`` (``a_pq`` in the squared-norm expansion)."""
        return self.M.T @ self.M

    def expected_sq_norm(self, zbar):
        zbar = np.asarray(zbar, float)
        return float(zbar @ zbar + self.e_ztz)

    def var_sq_norm(self, zbar):
        zbar = np.asarray(zbar, float)
        return float(4 * zbar @ self.var_z @ zbar + 4 * zbar @ self.cov_z_ztz + self.var_ztz)

    def std_sq_norm(self, zbar):
        return math.sqrt(max(self.var_sq_norm(zbar), 0.0))


def quadratic_moments(M, comps: ComponentMoments) -> QuadraticMomentData:
    """Second-order statistics of ``||zbar + M w||^2``.

    ``comps`` holds the moments of the components of ``w`` (length ``p``); only
    their central moments are used, any mean belongs in ``zbar``.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    var = np.asarray(comps.var, float).ravel()
    c3 = np.asarray(comps.c3, float).ravel()
    c4 = np.asarray(comps.c4, float).ravel()
    if not (M.shape[1] == var.size == c3.size == c4.size):
        raise DimensionError(f"map has {M.shape[1]} columns but {var.size} components were given")
    q = M.shape[0]
    var_z = (M * var) @ M.T
    a_diag = np.einsum("ip,ip->p", M, M)
    e_ztz = float(np.trace(var_z))
    # sum_p a_pp^2 (mu4 - sigma^4) + 2 sum_{p != q} a_pq^2 s_p s_q, with the
    # full double sum collapsed to ||Var z||_F^2
    var_ztz = float(np.sum(a_diag**2 * (c4 - 3 * var**2)) + 2 * np.sum(var_z**2))
    cov = M @ (a_diag * c3)

    exp_block = np.zeros((q + 1, q + 1))
    exp_block[:q, :q] = np.eye(q)
    exp_block[q, q] = e_ztz
    var_block = np.empty((q + 1, q + 1))
    var_block[:q, :q] = 4 * var_z
    var_block[:q, q] = var_block[q, :q] = 2 * cov
    var_block[q, q] = var_ztz
    return QuadraticMomentData(
        M=M,
        comp_var=var,
        var_z=var_z,
        e_ztz=e_ztz,
        var_ztz=var_ztz,
        cov_z_ztz=cov,
        exp_block_sqrt=psd_sqrt(exp_block),
        var_block_sqrt=psd_sqrt(var_block),
    )


def warn_degenerate(what):
    warnings.warn(f"{what} has zero standard deviation; treating it as deterministic",
                  RuntimeWarning, stacklevel=3)
