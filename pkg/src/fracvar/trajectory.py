"""Fractional power series trajectories ``x(t) = sum_k c_k (t - a)^e_k``."""
from __future__ import annotations

import math
from dataclasses import dataclass
from numbers import Real

import numpy as np
from scipy import optimize

from .fraccore import _check_order

MERGE_TOL = 1e-12


def _normalize(terms):
    merged = []
    for c, e in sorted(((float(c), float(e)) for c, e in terms), key=lambda ce: ce[1]):
        if merged and abs(e - merged[-1][1]) <= MERGE_TOL:
            merged[-1][0] += c
        else:
            merged.append([c, e])
    return tuple((c, e) for c, e in merged if c != 0.0)


@dataclass(frozen=True)
class FracPowerSeries:
    """Finite sum of shifted powers with distinct, increasing exponents.

    Exponents in ``(-1, 0)`` only arise from differentiating terms whose
    exponent is below the order; such series are flagged by
    :attr:`is_singular`.
    """

    a: float
    terms: tuple = ()

    def __post_init__(self):
        terms = _normalize(self.terms)
        for _, e in terms:
            if not e > -1:
                raise ValueError(f"exponent {e} is not integrable at the base point")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "terms", terms)

    @classmethod
    def constant(cls, a, value):
        return cls(a, ((value, 0.0),))

    @property
    def coefficients(self):
        return [c for c, _ in self.terms]

    @property
    def exponents(self):
        return [e for _, e in self.terms]

    @property
    def is_singular(self):
        return any(e < 0 for _, e in self.terms)

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < self.a):
            raise ValueError(f"trajectory evaluated left of its base point {self.a}")
        d = t_arr - self.a
        out = np.zeros_like(d)
        with np.errstate(divide="ignore"):
            for c, e in self.terms:
                out = out + (c if e == 0 else c * d ** e)
        return float(out) if np.ndim(t) == 0 else out

    def derivative(self, alpha):
        """Exact Jumarie derivative of order ``alpha``, termwise."""
        _check_order(alpha)
        out = []
        for c, e in self.terms:
            if e == 0:
                continue
            if e < 0:
                raise ValueError("cannot differentiate a singular series again")
            out.append((c * math.gamma(e + 1.0) / math.gamma(e + 1.0 - alpha), e - alpha))
        return FracPowerSeries(self.a, out)

    # series algebra, used to recognise integrands that stay in this class

    def _coerce(self, other):
        if isinstance(other, FracPowerSeries):
            if other.a != self.a:
                raise ValueError("series have different base points")
            return other
        if isinstance(other, Real):
            return FracPowerSeries.constant(self.a, other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return FracPowerSeries(self.a, self.terms + other.terms)

    __radd__ = __add__

    def __neg__(self):
        return FracPowerSeries(self.a, [(-c, e) for c, e in self.terms])

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return FracPowerSeries(
            self.a, [(c1 * c2, e1 + e2) for c1, e1 in self.terms for c2, e2 in other.terms]
        )

    __rmul__ = __mul__

    def __pow__(self, p):
        """Non-negative integer powers, or any power of a positive monomial."""
        p = float(p)
        if p == int(p) and p >= 0:
            out = FracPowerSeries.constant(self.a, 1.0)
            for _ in range(int(p)):
                out = out * self
            return out
        if len(self.terms) == 1:
            c, e = self.terms[0]
            if c > 0 and e * p > -1:
                return FracPowerSeries(self.a, ((c ** p, e * p),))
        if not self.terms and p > 0:
            return self
        raise ValueError(f"power {p} of {self} is not a fractional power series")

    def to_list(self):
        return [[c, e] for c, e in self.terms]


def eval_trajectory(x, t):
    return x(t)


def frac_derivative_trajectory(x, alpha):
    return x.derivative(alpha)


def _max_abs(fn, a, b, samples):
    t = np.linspace(a, b, samples)
    vals = np.abs(fn(t))
    if not np.all(np.isfinite(vals)):
        return math.inf
    i = int(np.argmax(vals))
    best = vals[i]
    if 0 < i < samples - 1:
        # refine inside the bracketing sample interval
        res = optimize.minimize_scalar(
            lambda s: -abs(float(fn(s))), bounds=(t[i - 1], t[i + 1]),
            method="bounded", options={"xatol": 1e-12},
        )
        best = max(best, -res.fun)
    return float(best)


def trajectory_norm(x, orders, a, b, samples=10_000):
    """``max|x| + sum_i max|x^(alpha_i)|`` over ``[a, b]``.

    Returns ``inf`` when a derivative has a singular term at ``a``.
    """
    total = _max_abs(x, a, b, samples)
    for alpha in orders:
        d = x.derivative(alpha)
        if d.is_singular:
            return math.inf
        total += _max_abs(d, a, b, samples)
    return total


def constrain_endpoints(free_coefficients, exponents, a, b, left=None, right=None):
    """Build a series over ``exponents`` meeting the given endpoint values.

    The constant term carries ``left``; when the left end is free the
    constant term is the first free coefficient instead.  With ``right``
    given, the coefficient of the last exponent is eliminated from the
    linear boundary equation.
    """
    exponents = [float(e) for e in exponents]
    if len(set(exponents)) != len(exponents) or any(e <= 0 for e in exponents):
        raise ValueError("basis exponents must be distinct and positive")
    free = [float(c) for c in free_coefficients]
    n_needed = free_coefficient_count(exponents, left, right)
    if n_needed < 0:
        raise ValueError("an empty basis cannot satisfy the right endpoint")
    if len(free) != n_needed:
        raise ValueError(f"expected {n_needed} free coefficients, got {len(free)}")
    if left is None:
        base, free = free[0], free[1:]
    else:
        base = float(left)
    terms = [(base, 0.0)] + list(zip(free, exponents))
    if right is not None:
        span = b - a
        partial = sum(c * span ** e for c, e in zip(free, exponents))
        last = exponents[-1]
        terms.append(((right - base - partial) / span ** last, last))
    return FracPowerSeries(a, terms)


def free_coefficient_count(exponents, left=None, right=None):
    return len(exponents) + (left is None) - (right is not None)
