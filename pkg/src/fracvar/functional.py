"""Integral functionals ``F_i[x]`` and their composition ``L = H(F_1, ..., F_n)``."""
from __future__ import annotations

from dataclasses import dataclass

from .expr import Expr, differentiate, evaluate, parse_expression
from .fraccore import DEFAULT_QUADRATURE, _check_order, frac_integral

TERM_VARIABLES = ("t", "y", "v")


def outer_variables(n):
    return tuple(f"z{i}" for i in range(1, n + 1))


@dataclass(frozen=True)
class LagrangianTerm:
    """One integrand ``f(t, y, v)`` of order ``alpha`` with its partials."""

    alpha: float
    f: Expr
    f_y: Expr
    f_v: Expr

    @classmethod
    def from_expr(cls, alpha, f):
        _check_order(alpha)
        return cls(float(alpha), f, differentiate(f, "y"), differentiate(f, "v"))

    @classmethod
    def parse(cls, alpha, source):
        return cls.from_expr(alpha, parse_expression(source, TERM_VARIABLES))

    def along(self, x, dx=None):
        """Return ``(t, x(t), x^(alpha)(t))`` bindings as a callable of ``t``."""
        if dx is None:
            dx = x.derivative(self.alpha)
        return lambda t: {"t": t, "y": x(t), "v": dx(t)}


@dataclass(frozen=True)
class CompositionProblem:
    a: float
    b: float
    terms: tuple
    H: Expr
    H_grad: tuple
    left: float | None = None
    right: float | None = None
    sense: str = "minimize"

    @property
    def n(self):
        return len(self.terms)

    @property
    def orders(self):
        return [term.alpha for term in self.terms]

    def outer_bindings(self, F):
        return dict(zip(outer_variables(self.n), F))

    def with_outer(self, H):
        """Same problem with a different outer function ``H``."""
        return make_problem(self.a, self.b, self.terms, H, self.left, self.right, self.sense)


def make_problem(a, b, terms, H, left=None, right=None, sense="minimize"):
    """Build a :class:`CompositionProblem`; ``H`` may be text or an ``Expr``."""
    a, b = float(a), float(b)
    if not a < b:
        raise ValueError(f"interval needs a < b, got [{a}, {b}]")
    terms = tuple(terms)
    if not terms:
        raise ValueError("a problem needs at least one term")
    if sense not in ("minimize", "maximize"):
        raise ValueError(f"sense must be 'minimize' or 'maximize', got {sense!r}")
    names = outer_variables(len(terms))
    if isinstance(H, str):
        H = parse_expression(H, names)
    elif not H.variables() <= set(names):
        raise ValueError(f"H uses variables outside {names}")
    grad = tuple(differentiate(H, z) for z in names)
    left = None if left is None else float(left)
    right = None if right is None else float(right)
    return CompositionProblem(a, b, terms, H, grad, left, right, sense)


def make_product(term1, term2, a=0.0, b=1.0, left=None, right=None, sense="minimize"):
    return make_problem(a, b, (term1, term2), "z1*z2", left, right, sense)


def make_quotient(term1, term2, a=0.0, b=1.0, left=None, right=None, sense="minimize"):
    return make_problem(a, b, (term1, term2), "z1/z2", left, right, sense)


def eval_term_functional(term, x, a, b, q=DEFAULT_QUADRATURE):
    """``int_a^b f(t, x(t), x^(alpha)(t)) (dt)^alpha``."""
    at = term.along(x)
    return frac_integral(lambda t: evaluate(term.f, at(t)), a, b, term.alpha, q)


def eval_functionals(p, x, q=DEFAULT_QUADRATURE):
    return [eval_term_functional(term, x, p.a, p.b, q) for term in p.terms]


def eval_composition(p, x, q=DEFAULT_QUADRATURE):
    """Return ``(L, F)`` for trajectory ``x``."""
    F = eval_functionals(p, x, q)
    return evaluate(p.H, p.outer_bindings(F)), F
