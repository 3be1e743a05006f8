import math

import numpy as np
import pytest

from fracvar.acceptance import closed_form_candidate, closed_form_q, product_problem
from fracvar.expr import DomainError
from fracvar.functional import LagrangianTerm, eval_composition, make_problem
from fracvar.solver import (
    ConvergenceError,
    RitzConfig,
    SingularJacobianError,
    build_q_system,
    default_basis,
    is_reference_product_problem,
    nelder_mead,
    q_grid_starts,
    q_trajectory,
    scan_roots,
    solve_ritz,
    solve_self_consistent,
)
from fracvar.trajectory import FracPowerSeries, constrain_endpoints, trajectory_norm

PI = math.pi
KINETIC = LagrangianTerm.parse(0.5, "v^2")


@pytest.fixture(scope="module")
def reference_solution():
    return solve_ritz(product_problem(), RitzConfig((0.5, 1.0)))


# --- Ritz ---------------------------------------------------------------------

def test_ritz_reference_problem(reference_solution):
    res = reference_solution
    c_half, c_one = closed_form_candidate()
    coeffs = dict((e, c) for c, e in res.trajectory.terms)
    assert coeffs[0.5] == pytest.approx(1.5346280, abs=1e-3)
    assert coeffs[1.0] == pytest.approx(-0.5346280, abs=1e-3)
    assert coeffs[0.5] == pytest.approx(c_half, abs=1e-6)
    assert res.L == pytest.approx(0.5351438, abs=1e-4)
    assert res.L < PI ** 2.5 / 32
    assert res.status == "converged"
    assert res.candidate == "candidate"
    assert res.residual.sup_norm <= 1e-4


def test_ritz_classical_line():
    p = make_problem(0, 1, (LagrangianTerm.parse(1.0, "v^2"),), "z1", left=0.0, right=1.0)
    res = solve_ritz(p, RitzConfig((1.0, 2.0, 3.0)))
    t = np.linspace(0, 1, 101)
    assert np.max(np.abs(res.trajectory(t) - t)) <= 1e-6
    assert res.L == pytest.approx(1.0, abs=1e-8)


def test_ritz_free_right_end_goes_to_zero():
    p = make_problem(0, 1, (KINETIC,), "z1", left=0.0)
    res = solve_ritz(p, RitzConfig((0.5, 1.0)))
    t = np.linspace(0, 1, 101)
    assert np.max(np.abs(res.trajectory(t))) <= 1e-4
    assert res.L <= 1e-8
    assert abs(res.residual.natural_right) <= 1e-4


def test_ritz_is_deterministic():
    cfg = RitzConfig((0.5, 1.0, 1.5), seed=11)
    a, b = solve_ritz(product_problem(), cfg), solve_ritz(product_problem(), cfg)
    assert a.to_dict() == b.to_dict()


def test_ritz_not_worse_than_zero_coefficients(reference_solution):
    start = constrain_endpoints([0.0], (0.5, 1.0), 0, 1, left=0.0, right=1.0)
    assert reference_solution.L <= eval_composition(product_problem(), start)[0]


def test_basis_enrichment_does_not_hurt(reference_solution):
    rich = solve_ritz(product_problem(), RitzConfig((0.5, 1.0, 1.5)))
    assert rich.L <= reference_solution.L + 1e-10


def test_ritz_maximize():
    # maximising -F1 with a fixed line is the same as minimising F1
    term = LagrangianTerm.parse(1.0, "v^2")
    lo = make_problem(0, 1, (term,), "z1", left=0.0, right=1.0)
    hi = make_problem(0, 1, (term,), "-z1", left=0.0, right=1.0, sense="maximize")
    a = solve_ritz(lo, RitzConfig((1.0, 2.0)))
    b = solve_ritz(hi, RitzConfig((1.0, 2.0)))
    assert b.L == pytest.approx(-a.L, abs=1e-8)


def test_ritz_max_evals_status():
    res = solve_ritz(product_problem(), RitzConfig((0.5, 1.0, 1.5, 2.0), max_evals=20, restarts=0))
    assert res.status == "max-evals"
    assert res.evaluations <= 20


def test_ritz_basis_too_small():
    with pytest.raises(ValueError):
        solve_ritz(product_problem(), RitzConfig((),))


def test_ritz_config_validation():
    with pytest.raises(ValueError):
        RitzConfig((0.5,), tol=0.0)


def test_default_basis():
    assert default_basis([0.5, 0.25]) == (0.25, 0.5)


def test_result_serialises(reference_solution):
    d = reference_solution.to_dict()
    assert d["candidate"] == "candidate"
    assert d["trajectory"]["base"] == 0.0
    assert len(d["trajectory"]["terms"]) == 2


def test_nelder_mead_quadratic():
    f = lambda x: (x[0] - 1) ** 2 + 10 * (x[1] + 2) ** 2
    x, fx, evals, converged = nelder_mead(f, np.array([[0, 0], [0.5, 0], [0, 0.5]], float), 1e-12, 5000)
    assert converged
    np.testing.assert_allclose(x, [1, -2], atol=1e-6)


def test_self_consistency_closure(reference_solution):
    Q1, Q2 = closed_form_q()
    diff = reference_solution.trajectory - q_trajectory(Q1, Q2)
    assert trajectory_norm(diff, [0.5, 0.5], 0, 1) <= 1e-3


# --- Newton -------------------------------------------------------------------

def test_newton_reference_system():
    Q1, Q2 = closed_form_q()
    found = solve_self_consistent(build_q_system(product_problem()), [1.0, 1.0])
    np.testing.assert_allclose(found, [Q1, Q2], atol=1e-6)
    # the closed forms against the quoted decimals; Q1 differs by about 5e-6
    assert Q2 == pytest.approx(0.6659888, abs=1e-7)
    assert Q1 == pytest.approx(0.8035326, abs=1e-5)


def test_newton_linear_map_one_step():
    q0 = np.array([3.0, -1.5, 0.25])
    found = solve_self_consistent(lambda q: np.asarray(q) - q0, [0.0, 0.0, 0.0], tol=1e-6, max_iter=1)
    np.testing.assert_allclose(found, q0, atol=1e-6)


def test_newton_singular_jacobian():
    with pytest.raises(SingularJacobianError):
        solve_self_consistent(lambda q: np.array([q[0] + q[1] - 1, q[0] + q[1] - 2]), [0.0, 0.0])


def test_newton_no_convergence():
    with pytest.raises(ConvergenceError):
        solve_self_consistent(lambda q: np.array([q[0] ** 2 + 1]), [1.0], max_iter=50)


# --- Q system -----------------------------------------------------------------

def test_q_system_at_closed_form():
    Q = closed_form_q()
    assert np.max(np.abs(build_q_system(product_problem())(Q))) <= 1e-9


@pytest.mark.parametrize("Q", [(PI / 4, PI ** 1.5 / 8), closed_form_q(), (1.0, -0.3)])
def test_q_trajectory_meets_endpoints(Q):
    x = q_trajectory(*Q)
    assert x(0.0) == 0.0
    assert x(1.0) == pytest.approx(1.0, abs=1e-9)


def test_q_trajectory_matches_candidate():
    c_half, c_one = closed_form_candidate()
    x = q_trajectory(*closed_form_q())
    assert dict((e, c) for c, e in x.terms) == pytest.approx({0.5: c_half, 1.0: c_one}, abs=1e-12)


def test_q_trajectory_guard():
    with pytest.raises(DomainError):
        q_trajectory(0.5, 0.0)


def test_q_system_rejects_other_problems():
    other = make_problem(0, 1, (KINETIC, KINETIC), "z1*z2", left=0.0, right=1.0)
    assert not is_reference_product_problem(other)
    with pytest.raises(ValueError):
        build_q_system(other)


def test_reference_detection_is_structural():
    p = make_problem(0, 1, (LagrangianTerm.parse(0.5, "v*v"), LagrangianTerm.parse(0.5, "v*sqrt(t)")),
                     "z2*z1", left=0, right=1)
    assert is_reference_product_problem(p)


def test_alternative_roots_are_flagged():
    roots = scan_roots(build_q_system(product_problem()), [(1.0, 1.0)] + q_grid_starts())
    Q = np.array(closed_form_q())
    assert np.max(np.abs(roots[0] - Q)) <= 1e-9
    assert len(roots) == 2
    np.testing.assert_allclose(roots[1], [4.56596967, 0.26206585], atol=1e-7)


def test_grid_starts():
    starts = q_grid_starts()
    assert len(starts) == 64
    assert starts[0] == (0.25, 0.25) and starts[-1] == (2.0, 2.0)
