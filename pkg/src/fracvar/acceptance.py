"""Acceptance checks, shared by ``fracvar selftest`` and the test suite.

Expected values come from closed forms (gamma and Beta arithmetic), never
from the code paths being checked.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fraccore import (
    DEFAULT_QUADRATURE,
    SampledFunction,
    check_integration_by_parts,
    frac_derivative_power,
    frac_derivative_sampled,
    frac_integral,
)
from .functional import LagrangianTerm, eval_term_functional, make_problem, make_product
from .solver import RitzConfig, build_q_system, q_trajectory, solve_ritz, solve_self_consistent
from .trajectory import FracPowerSeries
from .variational import (
    corollary_residual_product,
    corollary_residual_quotient,
    el_residual,
    natural_bc_defects,
)

PI = math.pi
SQRT_PI = math.sqrt(math.pi)
GAMMA_15 = SQRT_PI / 2


def beta_fn(p, q):
    return math.gamma(p) * math.gamma(q) / math.gamma(p + q)


def closed_form_q():
    """Closed-form ``(Q1, Q2)``."""
    root = math.sqrt(PI ** 3 - 8 * PI)
    Q1 = 4 / 3 * PI * (SQRT_PI * (PI ** 1.5 / 4 + root / 4) - 4) / (-32 + 3 * PI ** 2)
    Q2 = PI ** 1.5 / 12 + root / 12
    return Q1, Q2


def q_system_algebraic(Q1, Q2):
    """Algebraic self-consistency system of the reference product problem for ``(Q1, Q2)``, as residuals."""
    r1 = -(-32 * Q1 ** 2 - 48 * PI * Q2 ** 2 + 3 * Q1 ** 2 * PI ** 2) / (192 * Q2 ** 2) - Q1
    r2 = (-32 * Q1 + 3 * Q1 * PI ** 2 + 12 * PI ** 1.5 * Q2) / (96 * Q2) - Q2
    return r1, r2


def closed_form_candidate():
    """Monomial coefficients ``(c_half, c_one)`` of the reference product problem's candidate."""
    Q1, Q2 = closed_form_q()
    c_one = -Q1 * SQRT_PI / (4 * Q2)
    return 1 - c_one, c_one


def product_problem(right=1.0):
    t1 = LagrangianTerm.parse(0.5, "v^2")
    t2 = LagrangianTerm.parse(0.5, "t^(1/2)*v")
    return make_product(t1, t2, 0.0, 1.0, left=0.0, right=right)


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str


def _row(number, name, checks):
    """``checks`` is a list of ``(label, value, expected, tol)``."""
    ok = True
    parts = []
    for label, value, expected, tol in checks:
        err = abs(value - expected)
        good = bool(err <= tol)
        ok &= good
        parts.append(f"{label}={value:.9g} (err {err:.1e} <= {tol:.0e}: {'ok' if good else 'FAIL'})")
    return CheckResult(number, name, ok, "; ".join(parts))


def check_power_rule(q=DEFAULT_QUADRATURE):
    coef, expo = frac_derivative_power(0.5, 0.5)
    return _row(1, "power rule", [
        ("coef", coef, GAMMA_15, 1e-7),
        ("coef_vs_0.8862269", coef, 0.8862269, 1e-7),
        ("exponent", expo, 0.0, 0.0),
    ])


def check_dt_alpha_integral(q=DEFAULT_QUADRATURE):
    return _row(2, "(dt)^alpha integral", [
        ("int_0^1", frac_integral(lambda t: np.ones_like(t), 0, 1, 0.5, q), 1.0, 1e-10),
        ("int_0^4", frac_integral(lambda t: np.ones_like(t), 0, 4, 0.5, q), 2.0, 1e-10),
        ("int_sqrt", frac_integral(np.sqrt, 0, 1, 0.5, q), 0.5 * beta_fn(1.5, 0.5), 1e-8),
    ])


def random_series(rng, exponents=(0.5, 1.0, 1.5, 2.0), a=0.0):
    chosen = [e for e in exponents if rng.random() < 0.7] or [exponents[0]]
    terms = [(rng.uniform(-2, 2), 0.0)] + [(rng.uniform(-2, 2), e) for e in chosen]
    return FracPowerSeries(a, terms)


def check_fundamental_theorem(q=DEFAULT_QUADRATURE):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(20):
        x = random_series(rng)
        dx = x.derivative(0.5)
        lhs = frac_integral(dx, 0, 1, 0.5, q)
        worst = max(worst, abs(lhs - GAMMA_15 * (x(1.0) - x(0.0))))
    return _row(3, "fundamental theorem (20 random series)", [("max_defect", worst, 0.0, 1e-8)])


def check_global_minimizer_value(q=DEFAULT_QUADRATURE):
    term = LagrangianTerm.parse(0.5, "v^2")
    F1 = eval_term_functional(term, FracPowerSeries(0.0, ((1.0, 0.5),)), 0, 1, q)
    return _row(4, "F1[t^(1/2)] = (sqrt(pi)/2)^2", [("F1", F1, PI / 4, 1e-8)])


def check_q_system(q=DEFAULT_QUADRATURE):
    Q1, Q2 = closed_form_q()
    residual_map = build_q_system(product_problem(), q)
    found = solve_self_consistent(residual_map, [1.0, 1.0])
    quad_res = np.max(np.abs(residual_map([Q1, Q2])))
    alg_res = max(abs(r) for r in q_system_algebraic(Q1, Q2))
    return _row(5, "Q-system from (1, 1)", [
        ("Q1", found[0], Q1, 1e-6),
        ("Q2", found[1], Q2, 1e-6),
        ("closed_form_residual", quad_res, 0.0, 1e-9),
        ("closed_form_algebraic_residual", alg_res, 0.0, 1e-9),
    ])


def check_ritz(q=DEFAULT_QUADRATURE):
    c_half, c_one = closed_form_candidate()
    Q1, Q2 = closed_form_q()
    res = solve_ritz(product_problem(), RitzConfig((0.5, 1.0)), q)
    coeffs = dict((e, c) for c, e in res.trajectory.terms)
    L_sqrt = PI ** 2.5 / 32
    row = _row(6, "Ritz on basis {1/2, 1}", [
        ("c_half", coeffs.get(0.5, 0.0), c_half, 1e-3),
        ("c_one", coeffs.get(1.0, 0.0), c_one, 1e-3),
        ("L", res.L, Q1 * Q2, 1e-4),
        ("c_half_vs_1.5346280", coeffs.get(0.5, 0.0), 1.5346280, 1e-3),
        ("c_one_vs_-0.5346280", coeffs.get(1.0, 0.0), -0.5346280, 1e-3),
        ("L_vs_0.5351438", res.L, 0.5351438, 1e-4),
    ])
    below = res.L < L_sqrt
    row.passed &= below
    row.detail += f"; L < L[t^(1/2)]={L_sqrt:.9g}: {'ok' if below else 'FAIL'}"
    return row


def check_stationarity(q=DEFAULT_QUADRATURE):
    x = q_trajectory(*closed_form_q())
    report = el_residual(product_problem(), x, eps=1e-3, q=q)
    return _row(7, "stationarity of the closed-form candidate", [
        ("sup|R|", report.sup_norm, 0.0, 1e-6),
        ("x(0)", x(0.0), 0.0, 1e-9),
        ("x(1)", x(1.0), 1.0, 1e-9),
    ])


def check_corollary_equivalence(q=DEFAULT_QUADRATURE):
    rng = np.random.default_rng(7)
    t1 = LagrangianTerm.parse(0.5, "v^2")
    t2 = LagrangianTerm.parse(0.5, "t^(1/2)*v + y^2")
    worst_p = worst_q = 0.0
    for _ in range(20):
        x = random_series(rng)
        gen_p = el_residual(make_problem(0, 1, (t1, t2), "z1*z2"), x, q=q)
        cor_p = corollary_residual_product(t1, t2, x, 0, 1, q=q)
        worst_p = max(worst_p, np.max(np.abs(gen_p.samples - cor_p.samples)),
                      abs(gen_p.natural_left - cor_p.natural_left),
                      abs(gen_p.natural_right - cor_p.natural_right))
        gen_q = el_residual(make_problem(0, 1, (t1, t2), "z1/z2"), x, q=q)
        cor_q = corollary_residual_quotient(t1, t2, x, 0, 1, q=q)
        # the quotient form is the general residual multiplied by F2
        F2 = gen_q.F[1]
        worst_q = max(worst_q, np.max(np.abs(F2 * gen_q.samples - cor_q.samples)),
                      abs(F2 * gen_q.natural_left - cor_q.natural_left),
                      abs(F2 * gen_q.natural_right - cor_q.natural_right))
    return _row(8, "corollary forms vs general residual (20 random series)", [
        ("product_max_diff", worst_p, 0.0, 1e-10),
        ("quotient_max_diff", worst_q, 0.0, 1e-10),
    ])


def check_classical_limit(q=DEFAULT_QUADRATURE):
    term = LagrangianTerm.parse(1.0, "v^2")
    p = make_problem(0, 1, (term,), "z1", left=0.0, right=1.0)
    res = solve_ritz(p, RitzConfig((1.0, 2.0, 3.0)), q)
    coeffs = dict((e, c) for c, e in res.trajectory.terms)
    # classical oracle: H'(F) (f_y - d/dt f_v) with f_v = 2 x' by central differences
    x, dx = res.trajectory, res.trajectory.derivative(1.0)
    t = res.residual.grid
    h = 1e-4
    tt = np.clip(t, h, 1 - h)
    fd = -(2 * dx(tt + h) - 2 * dx(tt - h)) / (2 * h)
    oracle_gap = np.max(np.abs(res.residual.samples - fd))
    return _row(9, "classical limit alpha=1", [
        ("c_1", coeffs.get(1.0, 0.0), 1.0, 1e-6),
        ("c_2", coeffs.get(2.0, 0.0), 0.0, 1e-6),
        ("c_3", coeffs.get(3.0, 0.0), 0.0, 1e-6),
        ("L", res.L, 1.0, 1e-8),
        ("sup|R|", res.residual.sup_norm, 0.0, 1e-8),
        ("fd_oracle_gap", oracle_gap, 0.0, 1e-6),
    ])


def l1_max_error(h, alpha=0.5):
    n = round(1 / h)
    f = SampledFunction.from_callable(lambda t: t, 0.0, 1.0, n)
    g = frac_derivative_sampled(f, alpha)
    t = f.grid
    mask = t >= 0.1 - 1e-12
    exact = t[mask] ** (1 - alpha) / math.gamma(2 - alpha)
    return float(np.max(np.abs(g.samples[mask] - exact)))


def check_l1_convergence(q=DEFAULT_QUADRATURE):
    e1, e2 = l1_max_error(1e-2), l1_max_error(5e-3)
    ratio = e1 / e2
    ok = ratio >= 2 ** 1.3
    return CheckResult(10, "L1 convergence for f(t)=t", ok,
                       f"err(h=1e-2)={e1:.3e}, err(h=5e-3)={e2:.3e}, ratio={ratio:.3f} "
                       f">= {2 ** 1.3:.3f}: {'ok' if ok else 'FAIL'}")


def check_ibp_defect(q=DEFAULT_QUADRATURE):
    one = FracPowerSeries.constant(0.0, 1.0)
    t = FracPowerSeries(0.0, ((1.0, 1.0),))
    # 2 * (2/sqrt(pi)) * (1/2) B(5/2, 1/2) - Gamma(3/2)
    expected = 2 * (2 / SQRT_PI) * 0.5 * beta_fn(2.5, 0.5) - GAMMA_15
    return _row(11, "integration-by-parts defect", [
        ("const_factor", check_integration_by_parts(one, t, 0.5, 0, 1, q), 0.0, 1e-9),
        ("u=v=t", check_integration_by_parts(t, t, 0.5, 0, 1, q), expected, 1e-6),
        ("u=v=t_vs_0.4431127", check_integration_by_parts(t, t, 0.5, 0, 1, q), 0.4431127, 1e-6),
    ])


def check_natural_condition(q=DEFAULT_QUADRATURE):
    p = product_problem(right=None)
    _, right = natural_bc_defects(p, FracPowerSeries(0.0, ((1.0, 0.5),)), q)
    F1, F2 = PI / 4, PI ** 1.5 / 8
    expected = GAMMA_15 * (F2 * 2 * GAMMA_15 + F1 * 1.0)
    single = make_problem(0, 1, (LagrangianTerm.parse(0.5, "v^2"),), "z1", left=0.0)
    _, zero_right = natural_bc_defects(single, FracPowerSeries(0.0, ()), q)
    return _row(12, "natural boundary condition", [
        ("right_defect", right, expected, 1e-5),
        ("right_defect_vs_1.789380", right, 1.789380, 1e-5),
        ("zero_trajectory", zero_right, 0.0, 1e-12),
    ])


CHECKS = (
    check_power_rule,
    check_dt_alpha_integral,
    check_fundamental_theorem,
    check_global_minimizer_value,
    check_q_system,
    check_ritz,
    check_stationarity,
    check_corollary_equivalence,
    check_classical_limit,
    check_l1_convergence,
    check_ibp_defect,
    check_natural_condition,
)


def run_all(q=DEFAULT_QUADRATURE):
    results = []
    for i, check in enumerate(CHECKS, 1):
        try:
            results.append(check(q))
        except Exception as exc:  # a crashing check is a failing row
            results.append(CheckResult(i, check.__name__, False, f"raised {exc!r}"))
    return results


def format_table(results):
    lines = []
    for r in results:
        lines.append(f"[{'PASS' if r.passed else 'FAIL'}] {r.number:2d}. {r.name}: {r.detail}")
    passed = sum(r.passed for r in results)
    lines.append(f"{passed}/{len(results)} acceptance checks passed")
    return "\n".join(lines)
