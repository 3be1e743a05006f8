"""Euler-Lagrange and natural boundary residuals for composition functionals.

For a trajectory ``x`` the Euler-Lagrange residual is

    R(t) = sum_i alpha_i H'_i(F) (b - t)^(alpha_i - 1) (f_iy<x>_i(t) - [f_iv<x>_i]^(alpha_i)(t))

and the natural defect at a free end ``c`` is
``sum_i alpha_i! H'_i(F) f_iv<x>_i(c)``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .expr import DomainError, evaluate
from .fraccore import (
    DEFAULT_QUADRATURE,
    SampledFunction,
    alpha_factorial,
    frac_derivative_sampled,
)
from .functional import eval_functionals, make_problem
from .trajectory import FracPowerSeries

DEFAULT_GRID = 1000
SAMPLED_INTERVALS = 4096


@dataclass
class ResidualReport:
    grid: np.ndarray
    samples: np.ndarray
    term_defects: list
    F: list
    eps: float
    natural_left: float | None = None
    natural_right: float | None = None
    metadata: dict = field(default_factory=dict)
    term_weights: list = field(default_factory=list)

    @property
    def sup_norm(self):
        return float(np.max(np.abs(self.samples))) if self.samples.size else 0.0

    @property
    def unweighted(self):
        """``sum_i alpha_i H'_i(F) d_i(t)`` without the ``(b - t)^(alpha_i - 1)`` kernel."""
        out = np.zeros_like(self.grid)
        for w, d in zip(self.term_weights, self.term_defects):
            out = out + w * d
        return out

    @property
    def unweighted_sup_norm(self):
        u = self.unweighted
        return float(np.max(np.abs(u))) if u.size else 0.0

    def to_csv(self, path):
        n = len(self.term_defects)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "R"] + [f"defect_term_{i}" for i in range(1, n + 1)])
            for j, t in enumerate(self.grid):
                row = [t, self.samples[j]] + [d[j] for d in self.term_defects]
                writer.writerow([f"{v:.9g}" for v in row])

    def summary(self):
        return {
            "sup_norm": self.sup_norm,
            "unweighted_sup_norm": self.unweighted_sup_norm,
            "natural_left": self.natural_left,
            "natural_right": self.natural_right,
            "eps": self.eps,
            "F": list(self.F),
            **self.metadata,
        }


def default_eps(a, b):
    return (b - a) * 1e-3


# ---------------------------------------------------------------- f_v^(alpha)

def _time_series(a):
    return FracPowerSeries(a, ((a, 0.0), (1.0, 1.0)))


def as_series(node, env):
    """Rewrite ``node`` as a fractional power series, or return ``None``.

    ``env`` maps variable names to series.  Works when the tree only adds,
    multiplies, divides by constants and raises to constant powers that keep
    the result a series.
    """
    if not node.variables():
        a = next(iter(env.values())).a
        try:
            return FracPowerSeries.constant(a, evaluate(node, {}))
        except DomainError:
            return None
    k = node.kind
    if k == "var":
        return env[node.name]
    if k == "neg":
        inner = as_series(node.children[0], env)
        return None if inner is None else -inner
    if k == "call":
        if node.name != "sqrt":
            return None
        inner = as_series(node.children[0], env)
        return None if inner is None else _power(inner, 0.5)
    left, right = node.children
    if k == "pow":
        if right.variables():
            return None
        base = as_series(left, env)
        return None if base is None else _power(base, evaluate(right, {}))
    s1, s2 = as_series(left, env), as_series(right, env)
    if s1 is None or s2 is None:
        return None
    if k == "add":
        return s1 + s2
    if k == "sub":
        return s1 - s2
    if k == "mul":
        return s1 * s2
    # div: only by a nonzero constant
    if len(s2.terms) == 1 and s2.terms[0][1] == 0.0:
        return s1 * (1.0 / s2.terms[0][0])
    return None


def _power(series, p):
    try:
        return series ** p
    except ValueError:
        return None


def _check_regular(values, what):
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{what} is singular on the interval; the trajectory is not admissible here")


def fv_fractional_derivative(term, x, a, b, t):
    """``[f_v<x>](alpha)`` at ``t`` and the scheme used.

    Exact when ``f_v`` along ``x`` is itself a fractional power series;
    otherwise the sampled L1 route on ``SAMPLED_INTERVALS`` intervals.
    """
    dx = x.derivative(term.alpha)
    env = {"t": _time_series(x.a), "y": x, "v": dx}
    g = as_series(term.f_v, env)
    if g is not None and not g.is_singular:
        dg = g.derivative(term.alpha)
        return np.asarray(dg(t), dtype=float), "exact-series"
    at = term.along(x, dx)
    fine = np.linspace(a, b, SAMPLED_INTERVALS + 1)
    values = evaluate(term.f_v, at(fine))
    _check_regular(values, "f_v along the trajectory")
    sampled = SampledFunction(a, (b - a) / SAMPLED_INTERVALS, values)
    return np.asarray(frac_derivative_sampled(sampled, term.alpha)(t)), "l1-sampled"


def term_defect(term, x, a, b, t):
    """Unweighted ``f_y<x>(t) - [f_v<x>]^(alpha)(t)`` and the scheme used."""
    at = term.along(x)
    bind = at(t)
    _check_regular(bind["v"], "the fractional derivative of the trajectory")
    f_y = evaluate(term.f_y, bind)
    dfv, scheme = fv_fractional_derivative(term, x, a, b, t)
    return f_y - dfv, scheme


def _gradient(p, F):
    z = p.outer_bindings(F)
    return [evaluate(g, z) for g in p.H_grad]


def el_residual(p, x, grid_size=DEFAULT_GRID, eps=None, q=DEFAULT_QUADRATURE, F=None):
    """Euler-Lagrange residual of problem ``p`` along ``x`` on ``[a, b - eps]``."""
    eps = default_eps(p.a, p.b) if eps is None else float(eps)
    if not 0 < eps < p.b - p.a:
        raise ValueError(f"eps must lie in (0, b - a), got {eps}")
    F = eval_functionals(p, x, q) if F is None else list(F)
    grad = _gradient(p, F)
    t = np.linspace(p.a, p.b - eps, grid_size)
    defects, schemes = [], []
    R = np.zeros_like(t)
    for term, g in zip(p.terms, grad):
        d, scheme = term_defect(term, x, p.a, p.b, t)
        defects.append(d)
        schemes.append(scheme)
        R = R + term.alpha * g * (p.b - t) ** (term.alpha - 1.0) * d
    left, right = natural_bc_defects(p, x, q, F=F)
    meta = {"grid_size": grid_size, "derivative_scheme": schemes}
    weights = [term.alpha * g for term, g in zip(p.terms, grad)]
    return ResidualReport(t, R, defects, F, eps, left, right, meta, weights)


def _natural(p, x, c, grad):
    total = 0.0
    for term, g in zip(p.terms, grad):
        bind = term.along(x)(c)
        if not math.isfinite(bind["v"]):
            raise DomainError(f"x^({term.alpha}) is singular at t={c}")
        total += alpha_factorial(term.alpha) * g * evaluate(term.f_v, bind)
    return total


def natural_bc_defects(p, x, q=DEFAULT_QUADRATURE, F=None):
    """Natural-condition defects ``(left, right)``; ``None`` for fixed ends."""
    if p.left is not None and p.right is not None:
        return None, None
    F = eval_functionals(p, x, q) if F is None else F
    grad = _gradient(p, F)
    left = _natural(p, x, p.a, grad) if p.left is None else None
    right = _natural(p, x, p.b, grad) if p.right is None else None
    return left, right


# ------------------------------------------------------------ corollaries

def _two_term_report(term1, term2, x, a, b, weights, natural_weights, F,
                     left, right, grid_size, eps, kind):
    eps = default_eps(a, b) if eps is None else float(eps)
    t = np.linspace(a, b - eps, grid_size)
    d1, s1 = term_defect(term1, x, a, b, t)
    d2, s2 = term_defect(term2, x, a, b, t)
    w1, w2 = weights
    R = (term1.alpha * w1 * (b - t) ** (term1.alpha - 1.0) * d1
         + term2.alpha * w2 * (b - t) ** (term2.alpha - 1.0) * d2)

    def natural(c):
        v1 = evaluate(term1.f_v, term1.along(x)(c))
        v2 = evaluate(term2.f_v, term2.along(x)(c))
        n1, n2 = natural_weights
        return (alpha_factorial(term1.alpha) * n1 * v1
                + alpha_factorial(term2.alpha) * n2 * v2)

    nat_left = natural(a) if left is None else None
    nat_right = natural(b) if right is None else None
    meta = {"grid_size": grid_size, "derivative_scheme": [s1, s2], "form": kind}
    return ResidualReport(t, R, [d1, d2], F, eps, nat_left, nat_right, meta,
                          [term1.alpha * w1, term2.alpha * w2])


def corollary_residual_product(term1, term2, x, a, b, left=None, right=None,
                               grid_size=DEFAULT_GRID, eps=None, q=DEFAULT_QUADRATURE):
    """Residual in the explicit product form ``F_2 (...)_1 + F_1 (...)_2``."""
    p = make_problem(a, b, (term1, term2), "z1*z2", left, right)
    F1, F2 = eval_functionals(p, x, q)
    return _two_term_report(term1, term2, x, a, b, (F2, F1), (F2, F1), [F1, F2],
                            left, right, grid_size, eps, "product")


def corollary_residual_quotient(term1, term2, x, a, b, left=None, right=None,
                                grid_size=DEFAULT_GRID, eps=None, q=DEFAULT_QUADRATURE):
    """Residual in the explicit quotient form ``(...)_1 - Q (...)_2``, ``Q = F_1/F_2``.

    This is the general residual of ``H = z1/z2`` multiplied by ``F_2``.
    """
    p = make_problem(a, b, (term1, term2), "z1/z2", left, right)
    F1, F2 = eval_functionals(p, x, q)
    if F2 == 0:
        raise DomainError("quotient functional with vanishing denominator")
    Q = F1 / F2
    report = _two_term_report(term1, term2, x, a, b, (1.0, -Q), (1.0, -Q), [F1, F2],
                              left, right, grid_size, eps, "quotient")
    report.metadata["Q"] = Q
    return report
