"""Discrete LTI models and their horizon-stacked (concatenated) form.

State ordering for the planar Clohessy-Wiltshire-Hill (CWH) model is fixed
as ``(x, y, vx, vy)`` with ``x`` radial and ``y`` along-track.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .errors import DimensionError, InvalidParameterError

__all__ = [
    "LtiSystem",
    "CwhParams",
    "ConcatenatedDynamics",
    "cwh_continuous",
    "cwh_transition",
    "discretize_cwh",
    "build_concatenated",
    "mean_trajectory",
]

MU_EARTH = 3.986004418e14  # m^3/s^2
R_GEO = 4.2164e7  # m


def _frozen(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class LtiSystem:
    """Discrete-time pair ``x(k+1) = A x(k) + B u(k) + w(k)``."""

    A: np.ndarray
    B: np.ndarray
    dt: float = 1.0

    def __post_init__(self):
        A = _frozen(self.A)
        B = _frozen(self.B)
        if B.ndim == 1:
            B = _frozen(B.reshape(-1, 1))
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionError(f"A must be square, got shape {A.shape}")
        if B.ndim != 2 or B.shape[0] != A.shape[0]:
            raise DimensionError(f"B must have {A.shape[0]} rows, got shape {B.shape}")
        if not self.dt > 0:
            raise InvalidParameterError(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True)
class CwhParams:
    """Chief orbit and deputy mass for the planar CWH model."""

    mu: float = MU_EARTH
    R0: float = R_GEO
    mc: float = 1.0

    def __post_init__(self):
        for name in ("mu", "R0", "mc"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise InvalidParameterError(f"CWH parameter {name} must be positive, got {value}")

    @property
    def omega(self) -> float:
        """Orbital rate in rad/s."""
        return float(np.sqrt(self.mu / self.R0**3))


def cwh_continuous(omega):
    """Continuous-time planar CWH state matrix (no input)."""
    w = omega
    return np.array([
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [3.0 * w**2, 0.0, 0.0, 2.0 * w],
        [0.0, 0.0, -2.0 * w, 0.0],
    ])


def cwh_transition(omega, t):
    """Closed-form planar CWH state-transition matrix over ``t`` seconds.

    Written with ``1 - cos = 2 sin^2(./2)`` and ``sin(wt)/w`` so that it stays
    accurate as ``omega * t -> 0`` (where it tends to the double integrator).
    """
    nt = omega * t
    c = np.cos(nt)
    s = np.sin(nt)
    one_minus_c = 2.0 * np.sin(0.5 * nt) ** 2
    if nt == 0.0:
        s_over_w = t
        omc_over_w = 0.0
        four_s_minus_3nt_over_w = t
    else:
        s_over_w = s / omega
        omc_over_w = one_minus_c / omega
        four_s_minus_3nt_over_w = (4.0 * s - 3.0 * nt) / omega
    return np.array([
        [4.0 - 3.0 * c, 0.0, s_over_w, 2.0 * omc_over_w],
        [6.0 * (s - nt), 1.0, -2.0 * omc_over_w, four_s_minus_3nt_over_w],
        [3.0 * omega * s, 0.0, c, 2.0 * s],
        [-6.0 * omega * one_minus_c, 0.0, -2.0 * s, 4.0 * c - 3.0],
    ])


def discretize_cwh(params: CwhParams, dt: float, input_model: str = "impulse") -> LtiSystem:
    """Discretize planar CWH dynamics with sampling time ``dt``.

    Parameters
    ----------
    params : CwhParams
    dt : float
        Sampling time in seconds.
    input_model : {"impulse", "zoh"}
        ``"impulse"`` applies ``u / mc`` as a velocity change at the start of
        each interval, ``B = A(dt) [0; I/mc]``. ``"zoh"`` holds ``u`` as a
        constant force over the interval.
    """
    if not dt > 0:
        raise InvalidParameterError(f"dt must be positive, got {dt}")
    A = cwh_transition(params.omega, dt)
    Bc = np.vstack([np.zeros((2, 2)), np.eye(2) / params.mc])
    if input_model == "impulse":
        B = A @ Bc
    elif input_model == "zoh":
        # Van Loan block exponential: integral of expm(Ac s) Bc over [0, dt].
        M = np.zeros((6, 6))
        M[:4, :4] = cwh_continuous(params.omega)
        M[:4, 4:] = Bc
        B = expm(M * dt)[:4, 4:]
    else:
        raise InvalidParameterError(f"unknown input model {input_model!r}")
    return LtiSystem(A, B, dt)


@dataclass(frozen=True)
class ConcatenatedDynamics:
    """Horizon-stacked maps so that ``x(k) = A^k x0 + C[k] U + D[k] W``.

    ``powers[k]``, ``C[k]`` and ``D[k]`` are indexed by the step ``k`` in
    ``0..N``; the ``k = 0`` entries are ``I``, zero and zero.
    """

    system: LtiSystem
    N: int
    powers: np.ndarray = field(repr=False)
    C: np.ndarray = field(repr=False)
    D: np.ndarray = field(repr=False)

    @property
    def n(self):
        return self.system.n

    @property
    def m(self):
        return self.system.m


def build_concatenated(sys: LtiSystem, N: int) -> ConcatenatedDynamics:
    """Build ``A^k``, ``C(k) = [A^{k-1}B ... B 0]`` and ``D(k) = [A^{k-1} ... I 0]``."""
    if int(N) != N or N < 1:
        raise InvalidParameterError(f"horizon N must be a positive integer, got {N}")
    N = int(N)
    n, m = sys.n, sys.m
    powers = np.empty((N + 1, n, n))
    powers[0] = np.eye(n)
    for k in range(1, N + 1):
        powers[k] = sys.A @ powers[k - 1]
    C = np.zeros((N + 1, n, N * m))
    D = np.zeros((N + 1, n, N * n))
    for k in range(1, N + 1):
        for j in range(k):
            # input/disturbance applied at step j reaches x(k) through A^{k-1-j}
            C[k, :, j * m:(j + 1) * m] = powers[k - 1 - j] @ sys.B
            D[k, :, j * n:(j + 1) * n] = powers[k - 1 - j]
    return ConcatenatedDynamics(sys, N, _frozen(powers), _frozen(C), _frozen(D))


def mean_trajectory(cd: ConcatenatedDynamics, x0, U, wmean=None) -> np.ndarray:
    """Expected states ``x(0), ..., x(N)`` as an ``(N+1, n)`` array.

    ``wmean`` is the stacked disturbance mean ``E[W]`` (length ``N*n``);
    ``None`` means zero-mean.
    """
    x0 = np.asarray(x0, dtype=float)
    U = np.asarray(U, dtype=float).ravel()
    if x0.shape != (cd.n,):
        raise DimensionError(f"x0 must have length {cd.n}, got shape {x0.shape}")
    if U.shape != (cd.N * cd.m,):
        raise DimensionError(f"U must have length {cd.N * cd.m}, got {U.size}")
    if wmean is None:
        wmean = np.zeros(cd.N * cd.n)
    wmean = np.asarray(wmean, dtype=float).ravel()
    if wmean.shape != (cd.N * cd.n,):
        raise DimensionError(f"wmean must have length {cd.N * cd.n}, got {wmean.size}")
    return cd.powers @ x0 + cd.C @ U + cd.D @ wmean
