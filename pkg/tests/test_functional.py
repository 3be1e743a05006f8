import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracvar.expr import DomainError, parse_expression
from fracvar.fraccore import QuadratureConfig
from fracvar.functional import (
    LagrangianTerm,
    eval_composition,
    eval_term_functional,
    make_problem,
    make_product,
    make_quotient,
)
from fracvar.trajectory import FracPowerSeries

PI = math.pi
SQRT_T = FracPowerSeries(0.0, ((1.0, 0.5),))
KINETIC = LagrangianTerm.parse(0.5, "v^2")
WEIGHTED = LagrangianTerm.parse(0.5, "t^(1/2)*v")


def test_term_partials_precomputed():
    term = LagrangianTerm.parse(0.5, "y^2*v + t")
    assert str(term.f_y) == "2*y*v"
    assert str(term.f_v) == "y^2"
    with pytest.raises(ValueError):
        LagrangianTerm.parse(1.5, "v")


def test_eval_term_examples():
    assert eval_term_functional(KINETIC, SQRT_T, 0, 1) == pytest.approx(PI / 4, abs=1e-10)
    # (sqrt(pi)/2) * (1/2) B(3/2, 1/2)
    oracle = float(mpmath.sqrt(mpmath.pi) / 2 * mpmath.beta(1.5, 0.5) / 2)
    got = eval_term_functional(WEIGHTED, SQRT_T, 0, 1)
    assert got == pytest.approx(oracle, abs=1e-10)
    assert got == pytest.approx(0.6960410, abs=1e-7)


@pytest.mark.parametrize("alpha", [0.2, 0.5, 1.0])
def test_eval_term_constant_trajectory(alpha):
    term = LagrangianTerm.parse(alpha, "v^2")
    assert eval_term_functional(term, FracPowerSeries.constant(0, 3.0), 0, 1) == 0.0


def test_eval_term_domain_error():
    term = LagrangianTerm.parse(0.5, "ln(y)")
    with pytest.raises(DomainError):
        eval_term_functional(term, FracPowerSeries(0, ((-1.0, 1.0),)), 0, 1)


def test_eval_composition_examples():
    p = make_product(KINETIC, WEIGHTED, left=0.0, right=1.0)
    L, F = eval_composition(p, SQRT_T)
    assert L == pytest.approx(PI ** 2.5 / 32, abs=1e-10)
    assert L == pytest.approx(0.5466693, abs=1e-7)
    np.testing.assert_allclose(F, [0.7853982, 0.6960410], atol=1e-7)
    single = make_problem(0, 1, (KINETIC,), "z1")
    assert eval_composition(single, SQRT_T)[0] == pytest.approx(0.7853982, abs=1e-7)


def test_quotient_of_identical_terms_is_one():
    x = FracPowerSeries(0, ((1.0, 0.5), (0.3, 1.5)))
    L, F = eval_composition(make_quotient(WEIGHTED, WEIGHTED), x)
    assert L == 1.0 and F[0] == F[1]


def test_quotient_with_zero_denominator():
    with pytest.raises(DomainError):
        eval_composition(make_quotient(KINETIC, KINETIC), FracPowerSeries.constant(0, 1.0))


def test_make_product_and_quotient_gradients():
    p = make_product(KINETIC, WEIGHTED, left=0.0, right=1.0)
    assert [str(g) for g in p.H_grad] == ["z2", "z1"]
    assert (p.a, p.b, p.left, p.right, p.sense) == (0.0, 1.0, 0.0, 1.0, "minimize")
    qp = make_quotient(KINETIC, WEIGHTED)
    assert str(qp.H) == "z1/z2"
    assert str(qp.H_grad[0]) == "1/z2"
    from fracvar.expr import evaluate
    assert evaluate(qp.H_grad[1], {"z1": 3.0, "z2": 2.0}) == pytest.approx(-0.75)


def test_make_problem_validation():
    with pytest.raises(ValueError):
        make_problem(1, 0, (KINETIC,), "z1")
    with pytest.raises(ValueError):
        make_problem(0, 1, (), "1")
    with pytest.raises(ValueError):
        make_problem(0, 1, (KINETIC,), "z1", sense="sideways")
    with pytest.raises(ValueError):
        make_problem(0, 1, (KINETIC,), "z1*z2")
    with pytest.raises(ValueError):
        make_problem(0, 1, (KINETIC,), parse_expression("z1*z2", ("z1", "z2")))


def test_with_outer_keeps_terms():
    p = make_product(KINETIC, WEIGHTED, left=0.0, right=1.0)
    r = p.with_outer("2*z1*z2")
    assert r.terms == p.terms and r.right == 1.0
    assert eval_composition(r, SQRT_T)[0] == pytest.approx(2 * eval_composition(p, SQRT_T)[0])


# --- properties --------------------------------------------------------------

series = st.lists(st.tuples(st.floats(-2, 2), st.sampled_from([0.0, 0.5, 1.0, 1.5, 2.0])),
                  min_size=1, max_size=4).map(lambda t: FracPowerSeries(0.0, t))
integrands = st.sampled_from(["v^2", "t^(1/2)*v", "y^2 + v", "t*y*v", "v^3 - y"])


@settings(max_examples=40, deadline=None)
@given(series, integrands, st.sampled_from([0.25, 0.5, 1.0]))
def test_identity_outer_matches_single_term(x, source, alpha):
    term = LagrangianTerm.parse(alpha, source)
    L, _ = eval_composition(make_problem(0, 1, (term,), "z1"), x)
    assert L == eval_term_functional(term, x, 0, 1)


@settings(max_examples=30, deadline=None)
@given(series, integrands, integrands, integrands)
def test_permutation_equivariance(x, s1, s2, s3):
    terms = [LagrangianTerm.parse(0.5, s1), LagrangianTerm.parse(0.3, s2), LagrangianTerm.parse(1.0, s3)]
    p = make_problem(0, 1, terms, "z1 + 2*z2 - z3^2")
    # permute terms (3, 1, 2) and rename H accordingly
    r = make_problem(0, 1, [terms[2], terms[0], terms[1]], "z2 + 2*z3 - z1^2")
    L1, F1 = eval_composition(p, x)
    L2, F2 = eval_composition(r, x)
    assert F2 == [F1[2], F1[0], F1[1]]
    assert L2 == pytest.approx(L1, rel=1e-14, abs=1e-14)


@settings(max_examples=30, deadline=None)
@given(series, integrands, st.sampled_from([0.25, 0.5, 0.75, 1.0]))
def test_panel_doubling_is_stable(x, source, alpha):
    term = LagrangianTerm.parse(alpha, source)
    if x.derivative(alpha).is_singular:
        return
    coarse = eval_term_functional(term, x, 0, 1, QuadratureConfig(panels=8))
    fine = eval_term_functional(term, x, 0, 1, QuadratureConfig(panels=16))
    assert abs(coarse - fine) <= 1e-9
