"""Jumarie fractional derivative and (dt)^alpha integral, 0 < alpha <= 1.

Both operators use the lower terminal ``a`` of the working interval as base
point.  The (dt)^alpha integral is

    int_a^b f(tau) (dtau)^alpha = alpha * int_a^b (b - tau)^(alpha-1) f(tau) dtau
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


def _check_order(alpha, allow_one=True):
    ok = 0 < alpha <= 1 if allow_one else 0 < alpha < 1
    if not ok:
        bound = "(0, 1]" if allow_one else "(0, 1)"
        raise ValueError(f"order alpha={alpha!r} outside {bound}")


def gamma(x):
    """Euler gamma function for positive real ``x``."""
    if not x > 0:
        raise ValueError(f"gamma is only supported for x > 0, got {x!r}")
    return math.gamma(x)


def alpha_factorial(alpha):
    """``alpha! = Gamma(1 + alpha)``."""
    _check_order(alpha)
    return math.gamma(1.0 + alpha)


def frac_derivative_power(gamma_exp, alpha):
    """Order-``alpha`` derivative of ``(t - a)^gamma_exp``.

    Returns ``(coefficient, exponent)``; a constant maps to ``(0, 0)``.
    """
    _check_order(alpha)
    if gamma_exp < 0:
        raise ValueError(f"power exponent must be >= 0, got {gamma_exp!r}")
    if gamma_exp == 0:
        return 0.0, 0.0
    coef = math.gamma(gamma_exp + 1.0) / math.gamma(gamma_exp + 1.0 - alpha)
    return coef, gamma_exp - alpha


# ------------------------------------------------------------ sampled path

@dataclass(frozen=True)
class SampledFunction:
    """Values of a function on the uniform grid ``a, a+h, ..., b``."""

    a: float
    h: float
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or samples.size < 3:
            raise ValueError("a sampled function needs at least 3 samples")
        if not self.h > 0:
            raise ValueError(f"step must be positive, got {self.h!r}")
        object.__setattr__(self, "samples", samples)

    @classmethod
    def from_callable(cls, f, a, b, n):
        """Sample ``f`` at ``n + 1`` equispaced points of ``[a, b]``."""
        t = np.linspace(a, b, n + 1)
        return cls(a, (b - a) / n, np.asarray(f(t), dtype=float) * np.ones_like(t))

    @property
    def b(self):
        return self.a + self.h * (self.samples.size - 1)

    @property
    def grid(self):
        return self.a + self.h * np.arange(self.samples.size)

    def __call__(self, t):
        return np.interp(t, self.grid, self.samples)


def _product_trapezoid_weights(n, beta):
    """Weights of the piecewise-linear product rule for I^beta on n+1 nodes.

    Returns ``(w_first, w_conv)``: for node m >= 1,
    ``I[m] ~ w_first[m] * F[0] + sum_{k=1..m} w_conv[m-k] * F[k]`` times
    ``h^beta / Gamma(beta + 2)``.
    """
    m = np.arange(n + 1, dtype=float)
    bp1 = beta + 1.0
    w_first = np.zeros(n + 1)
    w_first[1:] = (m[1:] - 1.0) ** bp1 - (m[1:] - beta - 1.0) * m[1:] ** beta
    # w_conv[j] for j = m - k; j = 0 is the diagonal node
    w_conv = np.empty(n + 1)
    w_conv[0] = 1.0
    j = m[1:]
    w_conv[1:] = (j + 1.0) ** bp1 - 2.0 * j ** bp1 + (j - 1.0) ** bp1
    return w_first, w_conv


def frac_integral_sampled(values, h, beta):
    """Riemann-Liouville integral of order ``beta`` of piecewise-linear data.

    Exact for the linear interpolant of ``values`` on a uniform grid.
    """
    values = np.asarray(values, dtype=float)
    n = values.size - 1
    w_first, w_conv = _product_trapezoid_weights(n, beta)
    out = np.zeros(n + 1)
    # convolution over k = 1..m with weights indexed by m - k
    conv = np.convolve(values[1:], w_conv)[: n]
    out[1:] = w_first[1:] * values[0] + conv
    return out * h ** beta / math.gamma(beta + 2.0)


def frac_derivative_sampled(f, alpha):
    """Jumarie derivative of sampled data.

    The kernel integral ``I(t) = int_a^t (t-tau)^(-alpha) (f(tau) - f(a)) dtau
    / Gamma(1-alpha)`` is computed by piecewise-linear product integration
    and then differentiated on the grid with second-order differences.  The
    value at ``a`` is a linear extrapolation of the next two nodes.  For
    ``alpha == 1`` this is the classical second-order difference of ``f``.
    """
    _check_order(alpha)
    shifted = f.samples - f.samples[0]
    if alpha == 1:
        kernel = shifted
    else:
        kernel = frac_integral_sampled(shifted, f.h, 1.0 - alpha)
    g = np.gradient(kernel, f.h, edge_order=2)
    if alpha != 1:
        g[0] = 2.0 * g[1] - g[2]
    return SampledFunction(f.a, f.h, g)


# ------------------------------------------------------------- quadrature

@dataclass(frozen=True)
class QuadratureConfig:
    """Composite Gauss-Legendre rule in the variable ``s = (b - tau)^alpha``.

    ``panels`` uniform panels cover ``[0, (b-a)^alpha]``; the first and last
    panels are further split geometrically (ratio 1/2, ``graded_levels``
    times) towards the interval ends so that algebraic endpoint behaviour
    of the integrand is resolved.
    """

    nodes: int = 32
    panels: int = 8
    graded_levels: int = 12

    def __post_init__(self):
        if self.nodes < 2:
            raise ValueError("quadrature needs at least 2 nodes per panel")
        if self.panels < 1:
            raise ValueError("quadrature needs at least one panel")
        if self.graded_levels < 0:
            raise ValueError("graded_levels must be >= 0")


DEFAULT_QUADRATURE = QuadratureConfig()


@lru_cache(maxsize=32)
def _reference_rule(q, length):
    """Nodes and weights on ``[0, length]`` for config ``q`` (cached)."""
    x, w = np.polynomial.legendre.leggauss(q.nodes)
    edges = np.linspace(0.0, length, q.panels + 1)
    breaks = set(edges.tolist())
    width = length / q.panels
    for level in range(1, q.graded_levels + 1):
        breaks.add(width * 0.5 ** level)
        breaks.add(length - width * 0.5 ** level)
    breaks = np.array(sorted(breaks))
    lo, hi = breaks[:-1], breaks[1:]
    half = 0.5 * (hi - lo)
    nodes = (lo[:, None] + half[:, None] * (x[None, :] + 1.0)).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def frac_integral(f, a, b, alpha, q=DEFAULT_QUADRATURE):
    """``alpha * int_a^b (b - tau)^(alpha-1) f(tau) dtau``.

    ``f`` is called with a numpy array of abscissae in ``(a, b)``.  After the
    substitution ``s = (b - tau)^alpha`` the integral becomes
    ``int_0^{(b-a)^alpha} f(b - s^(1/alpha)) ds``, evaluated with the
    composite rule of ``q``.
    """
    _check_order(alpha)
    if not b > a:
        raise ValueError(f"need b > a, got a={a!r}, b={b!r}")
    length = (b - a) ** alpha
    s, w = _reference_rule(q, length)
    tau = np.clip(b - s ** (1.0 / alpha), a, b)
    values = np.broadcast_to(np.asarray(f(tau), dtype=float), tau.shape)
    return float(np.dot(w, values))


def check_integration_by_parts(u, v, alpha, a, b, q=DEFAULT_QUADRATURE):
    """Defect of the Jumarie integration-by-parts formula.

    ``u`` and ``v`` are fractional power series based at ``a``.  Returns
    ``int u^(alpha) v (dt)^alpha + int u v^(alpha) (dt)^alpha - alpha! [uv]_a^b``.
    The defect is not zero in general (e.g. ``u = v = t``).
    """
    du, dv = u.derivative(alpha), v.derivative(alpha)
    lhs = frac_integral(lambda t: du(t) * v(t), a, b, alpha, q)
    lhs += frac_integral(lambda t: u(t) * dv(t), a, b, alpha, q)
    return lhs - alpha_factorial(alpha) * (u(b) * v(b) - u(a) * v(a))
