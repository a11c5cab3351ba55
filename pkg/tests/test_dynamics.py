import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from vpplan.dynamics import (
    MU_EARTH,
    R_GEO,
    CwhParams,
    LtiSystem,
    build_concatenated,
    cwh_continuous,
    cwh_transition,
    discretize_cwh,
    mean_trajectory,
)
from vpplan.errors import DimensionError, InvalidParameterError


def rk4_transition(Ac, t, steps):
    """Integrate x' = Ac x column by column with classical RK4."""
    h = t / steps
    X = np.eye(Ac.shape[0])
    for _ in range(steps):
        k1 = Ac @ X
        k2 = Ac @ (X + 0.5 * h * k1)
        k3 = Ac @ (X + 0.5 * h * k2)
        k4 = Ac @ (X + h * k3)
        X = X + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return X


def rel_err(a, b):
    return np.max(np.abs(a - b)) / np.max(np.abs(b))


def test_geo_orbital_rate():
    w = CwhParams().omega
    assert w == pytest.approx(np.sqrt(MU_EARTH / R_GEO**3), rel=1e-15)
    # sidereal-day rate of a geostationary orbit
    assert w == pytest.approx(7.2921e-5, rel=1e-4)


@pytest.mark.parametrize("omega,dt", [(CwhParams().omega, 60.0), (1.1e-3, 600.0), (1e-3, 3000.0)])
def test_transition_matches_rk4(omega, dt):
    A = cwh_transition(omega, dt)
    A_rk4 = rk4_transition(cwh_continuous(omega), dt, 4000)
    assert rel_err(A, A_rk4) < 1e-8


def test_transition_matches_expm():
    omega = 2e-3
    for t in (1.0, 100.0, 1e4):
        assert rel_err(cwh_transition(omega, t), expm(cwh_continuous(omega) * t)) < 1e-12


def test_transition_zero_rate_is_double_integrator():
    A = cwh_transition(0.0, 5.0)
    expected = np.eye(4)
    expected[0, 2] = expected[1, 3] = 5.0
    np.testing.assert_allclose(A, expected, atol=0)


def test_transition_tiny_rate_continuous():
    # the cancellation-free form must approach the double integrator smoothly
    np.testing.assert_allclose(cwh_transition(1e-12, 60.0), cwh_transition(0.0, 60.0), atol=1e-8)


def test_transition_semigroup():
    w = 1e-3
    np.testing.assert_allclose(cwh_transition(w, 70.0) @ cwh_transition(w, 30.0),
                               cwh_transition(w, 100.0), rtol=1e-12, atol=1e-12)


def test_impulse_input_matrix():
    p = CwhParams(mc=4.0)
    sys = discretize_cwh(p, 60.0)
    A = cwh_transition(p.omega, 60.0)
    np.testing.assert_allclose(sys.B, A[:, 2:] / 4.0, rtol=1e-15)


def test_zoh_input_matrix_matches_quadrature():
    p = CwhParams(mu=MU_EARTH, R0=7.0e6, mc=2.0)
    dt = 120.0
    sys = discretize_cwh(p, dt, "zoh")
    Bc = np.vstack([np.zeros((2, 2)), np.eye(2) / p.mc])
    # composite Simpson quadrature of expm(Ac s) Bc over [0, dt]
    s = np.linspace(0.0, dt, 2001)
    vals = np.array([cwh_transition(p.omega, si) @ Bc for si in s])
    wts = np.ones(s.size)
    wts[1:-1:2], wts[2:-1:2] = 4.0, 2.0
    B_ref = np.tensordot(wts, vals, axes=1) * (s[1] - s[0]) / 3.0
    assert rel_err(sys.B, B_ref) < 1e-10


def test_discretize_rejects_bad_input():
    with pytest.raises(InvalidParameterError):
        discretize_cwh(CwhParams(), 0.0)
    with pytest.raises(InvalidParameterError):
        discretize_cwh(CwhParams(), 60.0, "foh")
    with pytest.raises(InvalidParameterError):
        CwhParams(mc=-1.0)


def test_lti_system_validation():
    with pytest.raises(DimensionError):
        LtiSystem(np.eye(3), np.ones((2, 1)), 1.0)
    with pytest.raises((DimensionError, InvalidParameterError)):
        LtiSystem(np.ones((2, 3)), np.ones((2, 1)), 1.0)
    with pytest.raises(InvalidParameterError):
        LtiSystem(np.eye(2), np.ones((2, 1)), -1.0)


def simulate(sys, x0, U, W):
    N = U.shape[0]
    xs = [x0]
    for k in range(N):
        xs.append(sys.A @ xs[-1] + sys.B @ U[k] + W[k])
    return np.array(xs)


@pytest.mark.parametrize("seed", range(5))
def test_concatenated_matches_recursion(seed):
    rng = np.random.default_rng(seed)
    n, m, N = 4, 2, 8
    A = rng.normal(size=(n, n)) / np.sqrt(n)
    B = rng.normal(size=(n, m))
    sys = LtiSystem(A, B, 1.0)
    cd = build_concatenated(sys, N)
    x0 = rng.normal(size=n)
    U = rng.normal(size=(N, m))
    W = rng.normal(size=(N, n))
    ref = simulate(sys, x0, U, W)
    got = mean_trajectory(cd, x0, U.ravel(), W.ravel())
    assert np.max(np.abs(got - ref)) <= 1e-12 * max(1.0, np.max(np.abs(ref)))


def test_concatenated_cwh_matches_recursion(rng):
    sys = discretize_cwh(CwhParams(), 60.0)
    cd = build_concatenated(sys, 8)
    x0 = np.array([60.0, -20.0, 0.01, 0.0])
    U = rng.uniform(-0.75, 0.75, size=(8, 2))
    W = rng.exponential(0.05, size=(8, 4))
    ref = simulate(sys, x0, U, W)
    got = mean_trajectory(cd, x0, U.ravel(), W.ravel())
    assert np.max(np.abs(got - ref)) <= 1e-12 * np.max(np.abs(ref))


def test_concatenated_structure():
    sys = discretize_cwh(CwhParams(), 60.0)
    cd = build_concatenated(sys, 3)
    np.testing.assert_array_equal(cd.powers[0], np.eye(4))
    assert not cd.C[0].any() and not cd.D[0].any()
    # the last input block of C(k) is B, everything after step k-1 is zero
    np.testing.assert_array_equal(cd.C[2][:, 2:4], sys.B)
    assert not cd.C[2][:, 4:].any()
    np.testing.assert_array_equal(cd.D[3][:, 8:12], np.eye(4))
    with pytest.raises(ValueError):
        cd.C[1, 0, 0] = 1.0


def test_mean_trajectory_shapes():
    cd = build_concatenated(discretize_cwh(CwhParams(), 60.0), 4)
    with pytest.raises(DimensionError):
        mean_trajectory(cd, np.zeros(3), np.zeros(8))
    with pytest.raises(DimensionError):
        mean_trajectory(cd, np.zeros(4), np.zeros(7))
    with pytest.raises(InvalidParameterError):
        build_concatenated(cd.system, 0)


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-6, 5e-3), st.floats(1.0, 900.0))
def test_transition_determinant_is_one(omega, dt):
    # CWH flow is volume preserving (trace of Ac is zero)
    assert np.linalg.det(cwh_transition(omega, dt)) == pytest.approx(1.0, rel=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 10), st.integers(0, 2**31 - 1))
def test_superposition(N, seed):
    rng = np.random.default_rng(seed)
    cd = build_concatenated(discretize_cwh(CwhParams(), 60.0), N)
    x0 = rng.normal(size=4)
    U1, U2 = rng.normal(size=(2, 2 * N))
    a = mean_trajectory(cd, x0, U1 + U2)
    b = mean_trajectory(cd, x0, U1) + mean_trajectory(cd, np.zeros(4), U2)
    np.testing.assert_allclose(a, b, atol=1e-9)
