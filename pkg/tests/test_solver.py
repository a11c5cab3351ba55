import copy

import numpy as np
import pytest
from scipy.optimize import linprog

from vpplan import parse_scenario, solve_ccp
from vpplan.backends import ClarabelBackend, CvxoptBackend, get_backend, standard_form
from vpplan.bounds import BoundKind
from vpplan.config import CcpConfig
from vpplan.errors import InfeasibleScenarioError, SolverFailure
from vpplan.reformulate import LinearizationPoint, Reformulation, assemble_problem, exact_dc_row_value
from vpplan.solver import CERT_TOL, PlanSolution, compare_bounds


def toy_doc(target_x=1.0, umax=None, var=1e-30):
    doc = {
        "dynamics": {"kind": "explicit", "dt": 1.0,
                     "matrices": {"A": [[1, 0, 1, 0], [0, 1, 0, 1], [0, 0, 1, 0], [0, 0, 0, 1]],
                                  "B": [[0.5, 0], [0, 0.5], [1, 0], [0, 1]]}},
        "horizon": 4,
        "vehicles": [{"x0": [0, 0, 0, 0], "target": {"rows": [{"G": [-1, 0, 0, 0], "h": -target_x}]}}],
        "disturbance": {"family": "gaussian", "params": {"var": var}},
        "thresholds": {"alpha": 0.05},
    }
    if umax is not None:
        doc["input_box"] = {"lower": [-umax, -umax], "upper": [umax, umax]}
    return doc


def test_deterministic_toy_is_qp_optimum():
    sc = parse_scenario(toy_doc())
    sol = solve_ccp(sc)
    assert sol.iterations == 1 and sol.converged and sol.certified
    # min ||U||^2 s.t. c.U >= 1 has the closed form U = c / ||c||^2
    c = sc.concatenated().C[4][0]
    expected = c / (c @ c)
    np.testing.assert_allclose(sol.U.ravel(), expected, atol=1e-7)
    assert sol.cost == pytest.approx(1.0 / (c @ c), rel=1e-6)


def test_unreachable_target_is_infeasible():
    doc = toy_doc(target_x=50.0, umax=1.0)
    sc = parse_scenario(doc)
    # LP oracle: maximum reachable x(4) under the input box
    c = sc.concatenated().C[4][0]
    lp = linprog(-c, bounds=[(-1.0, 1.0)] * c.size)
    assert -lp.fun < 50.0
    with pytest.raises(InfeasibleScenarioError):
        solve_ccp(sc)
    reachable = parse_scenario(toy_doc(target_x=0.9 * -lp.fun, umax=1.0))
    assert solve_ccp(reachable).certified


def test_exponential_fixture_converges(exp_vp, exp_scenario):
    assert exp_vp.converged and exp_vp.certified
    assert exp_vp.iterations <= 100
    assert exp_vp.slack_sum < 1e-8
    assert exp_vp.cost > 0
    assert exp_vp.cost == pytest.approx(float(np.sum(exp_vp.U**2)))
    assert np.all(np.abs(exp_vp.U) <= 0.75 + 1e-9)


def check_certificate(sol, scenario, kind):
    """Independent re-check of every row from the moments alone."""
    ref = Reformulation.build(scenario, kind)
    U = sol.U.reshape(scenario.Nv, -1)
    for row in ref.collisions:
        assert exact_dc_row_value(row, U, ref.omega(row), ref.kind) >= -CERT_TOL
    total = 0.0
    for row in ref.targets:
        lam = sol.target_lambdas[row.key]
        assert row.mean(U[row.vehicle]) + lam * row.std <= row.h + CERT_TOL
        total += kind.numerator / (lam**2 + 1)
    assert total <= scenario.alpha + 1e-12


@pytest.mark.parametrize("which", ["exp_vp", "exp_cantelli", "gauss_vp"])
def test_certified_solutions_are_sound(which, request):
    sol = request.getfixturevalue(which)
    scenario = request.getfixturevalue("gauss_scenario" if which.startswith("gauss") else "exp_scenario")
    assert sol.certified
    check_certificate(sol, scenario, sol.bound)


@pytest.mark.parametrize("which", ["exp_vp", "exp_cantelli", "gauss_vp"])
def test_penalized_objective_monotone(which, request):
    trace = request.getfixturevalue(which).trace
    for prev, cur in zip(trace, trace[1:]):
        if prev.penalty == cur.penalty:
            assert cur.penalized <= prev.penalized + 1e-9


def test_determinism(exp_scenario, exp_vp):
    again = solve_ccp(exp_scenario, kind="vp")
    assert np.max(np.abs(again.U - exp_vp.U)) <= 1e-12


def test_vp_not_costlier_than_cantelli(exp_vp, exp_cantelli):
    assert exp_vp.certified and exp_cantelli.certified
    assert exp_vp.cost <= exp_cantelli.cost


def test_compare_flags_cantelli_when_only_vp_is_feasible(exp_scenario):
    # uniform target risk 0.075/24 needs 17.9 standard deviations under
    # Cantelli but 11.9 under VP, and the 5 m boxes only fit the latter
    sc = exp_scenario.with_changes(allocation="uniform")
    cmp = compare_bounds(sc)
    assert BoundKind.VP in cmp.solutions and cmp.solutions[BoundKind.VP].certified
    assert BoundKind.CANTELLI in cmp.errors
    assert cmp.cost_delta is None


def test_max_iters_without_convergence_is_not_certified(exp_scenario):
    sol = solve_ccp(exp_scenario, config=CcpConfig(max_iters=2))
    assert sol.iterations == 2
    assert not sol.certified
    assert any("max_iters" in n for n in sol.notes)


@pytest.mark.slow
def test_cvxopt_backend_certifies(exp_scenario):
    sol = solve_ccp(exp_scenario, backend="cvxopt")
    assert sol.certified and sol.iterations <= 100
    check_certificate(sol, exp_scenario, BoundKind.VP)


def test_backends_agree_on_one_subproblem(exp_scenario, exp_vp):
    # linearized at the converged plan, where slack is inactive and the
    # subproblem is well conditioned
    ref = Reformulation.build(exp_scenario, "vp")
    lin = LinearizationPoint.at(exp_vp.U.reshape(3, -1), ref.collisions)
    prob = assemble_problem(ref, lin, 1e4, 1e-7)
    a = ClarabelBackend().solve(prob)
    b = CvxoptBackend().solve(prob)
    assert a.status == b.status == "optimal"
    assert a.objective == pytest.approx(b.objective, rel=1e-7)
    assert prob.max_violation(a.x) < 1e-7 and prob.max_violation(b.x) < 1e-7


def test_standard_form_cone_sizes(exp_scenario):
    ref = Reformulation.build(exp_scenario, "vp")
    prob = assemble_problem(ref, LinearizationPoint.at(np.zeros((3, 16)), ref.collisions), 1.0)
    G, h, n_orth, soc = standard_form(prob)
    assert G.shape == (n_orth + sum(soc), prob.nvar)
    assert soc == [1 + s.F.shape[0] for s in prob.socs]


def test_get_backend(monkeypatch):
    assert isinstance(get_backend("cvxopt"), CvxoptBackend)
    monkeypatch.setenv("VPPLAN_BACKEND", "cvxopt")
    assert isinstance(get_backend(None), CvxoptBackend)
    with pytest.raises(SolverFailure):
        get_backend("gurobi")
    with pytest.raises(SolverFailure):
        get_backend(object())


def test_solution_round_trip(exp_vp):
    back = PlanSolution.from_dict(copy.deepcopy(exp_vp.to_dict()))
    np.testing.assert_array_equal(back.U, exp_vp.U)
    assert back.collision_margins == exp_vp.collision_margins
    assert back.target_lambdas == exp_vp.target_lambdas
    assert back.bound is exp_vp.bound


def test_ccp_config_validation():
    with pytest.raises(ValueError):
        CcpConfig(obj_tol=0)
    with pytest.raises(ValueError):
        CcpConfig(max_iters=0)
    with pytest.raises(ValueError):
        CcpConfig.from_dict({"penalty": 3})
    assert CcpConfig.from_dict(None) == CcpConfig()
