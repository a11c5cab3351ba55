import numpy as np
import pytest

from vpplan.bounds import BoundKind, lambda_for_risk, tail_bound
from vpplan.errors import DomainError
from vpplan.moments import affine_moments
from vpplan.reformulate import (
    LinearizationPoint,
    Reformulation,
    assemble_problem,
    build_allocation,
    collision_row,
    exact_dc_row_value,
    lambda_envelope,
)


@pytest.fixture(scope="module")
def ref(exp_scenario):
    return Reformulation.build(exp_scenario, "vp")


def test_row_counts(ref, exp_scenario):
    assert len(ref.targets) == 3 * 8
    assert len(ref.collisions) == 3 * exp_scenario.N
    assert ref.layout["nvar"] == 3 * 16 + 2 * 24 + 24


def test_target_rows_affine_in_inputs(ref, exp_scenario, rng):
    cd = ref.cd
    U = rng.uniform(-0.5, 0.5, size=(3, 16))
    for row in ref.targets[::5]:
        i = row.vehicle
        shift, std = affine_moments(row.g, cd, exp_scenario.disturbance, row.step, i)
        direct = row.g @ (cd.powers[row.step] @ exp_scenario.x0[i] + cd.C[row.step] @ U[i]) + shift
        assert row.mean(U[i]) == pytest.approx(direct, rel=1e-12, abs=1e-12)
        assert row.std == std


def test_uniform_collision_allocation(exp_scenario):
    alloc = build_allocation(exp_scenario, "vp")
    assert alloc.optimize_target
    vals = set(alloc.collision.values())
    assert len(vals) == 1 and vals.pop() == pytest.approx(0.075 / 24)


def test_linearized_row_is_exact_at_the_point(ref, rng):
    U = rng.uniform(-0.3, 0.3, size=(3, 16))
    lin = LinearizationPoint.at(U, ref.collisions)
    x = np.zeros(ref.layout["nvar"])
    for s, u in zip(ref.layout["U"], U):
        x[s] = u
    for row in ref.collisions:
        soc = collision_row(row, ref.omega(row), ref.kind, lin, ref.layout)
        assert soc.residual(x) == pytest.approx(exact_dc_row_value(row, U, ref.omega(row), ref.kind),
                                                rel=1e-9, abs=1e-7)


def test_linearized_row_underestimates_elsewhere(ref, rng):
    # the tangent of the convex expectation term lies below it, so the
    # linearized row is a restriction of the exact one
    U0 = rng.uniform(-0.3, 0.3, size=(3, 16))
    lin = LinearizationPoint.at(U0, ref.collisions)
    for _ in range(5):
        U = rng.uniform(-0.75, 0.75, size=(3, 16))
        x = np.zeros(ref.layout["nvar"])
        for s, u in zip(ref.layout["U"], U):
            x[s] = u
        for row in ref.collisions:
            soc = collision_row(row, ref.omega(row), ref.kind, lin, ref.layout)
            assert soc.residual(x) <= exact_dc_row_value(row, U, ref.omega(row), ref.kind) + 1e-7


def test_slack_relaxes_row(ref):
    U = np.zeros((3, 16))
    lin = LinearizationPoint.at(U, ref.collisions)
    row = ref.collisions[0]
    soc = collision_row(row, ref.omega(row), ref.kind, lin, ref.layout)
    x = np.zeros(ref.layout["nvar"])
    base = soc.residual(x)
    x[ref.layout["slack"][row.key]] = 2.5
    assert soc.residual(x) == pytest.approx(base + 2.5)


def test_collision_row_domain(ref):
    lin = LinearizationPoint.at(np.zeros((3, 16)), ref.collisions)
    with pytest.raises(DomainError):
        collision_row(ref.collisions[0], 0.2, "vp", lin, ref.layout)
    with pytest.raises(ValueError):
        collision_row(ref.collisions[0], 0.01, "vp", None, ref.layout)


@pytest.mark.parametrize("kind", ["vp", "cantelli"])
def test_envelope_over_bounds_tail(kind):
    alpha = 0.075
    lam_min, lam_max, slopes, icpts, floor = lambda_envelope(kind, alpha)
    assert lam_min == pytest.approx(lambda_for_risk(kind, alpha))
    lams = np.concatenate([np.linspace(lam_min, 3 * lam_min, 2000), np.geomspace(lam_min, lam_max, 2000)])
    env = np.maximum(np.max(slopes[:, None] * lams + icpts[:, None], axis=0), floor)
    f = tail_bound(kind, lams)
    assert np.all(env >= f * (1 - 1e-12))
    # chords are tight enough that the envelope wastes under 1% of the risk
    assert np.max((env - f) / f) < 1e-2


def test_assembled_problem_structure(ref):
    lin = LinearizationPoint.at(np.zeros((3, 16)), ref.collisions)
    prob = assemble_problem(ref, lin, penalty=1e4, margin=0.0)
    assert prob.nvar == ref.layout["nvar"]
    assert len(prob.socs) == len(ref.collisions)
    slack_idx = list(ref.layout["slack"].values())
    np.testing.assert_array_equal(prob.q[slack_idx], 1e4)
    np.testing.assert_array_equal(prob.lb[slack_idx], 0.0)
    for s in ref.layout["U"]:
        np.testing.assert_array_equal(prob.ub[s], 0.75)
    x = np.zeros(prob.nvar)
    x[ref.layout["U"][0]] = 0.1
    assert prob.objective(x) == pytest.approx(16 * 0.01)


def test_fixed_allocation_target_rows(exp_scenario):
    sc = exp_scenario.with_changes(allocation="uniform")
    ref = Reformulation.build(sc, "vp")
    assert "lam" not in ref.layout
    lin = LinearizationPoint.at(np.zeros((3, 16)), ref.collisions)
    prob = assemble_problem(ref, lin, 1.0)
    lam = ref.allocation.target_lambda(ref.targets[0].key)
    row = ref.targets[0]
    assert prob.b[0] == pytest.approx(row.h - row.const - lam * row.std)


def test_allocation_kind_mismatch(exp_scenario):
    alloc = build_allocation(exp_scenario, "cantelli")
    with pytest.raises(ValueError):
        Reformulation.build(exp_scenario, BoundKind.VP, alloc)
