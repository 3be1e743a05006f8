"""Candidate extremizers: direct Ritz minimisation and damped Newton systems.

Everything returned here is only a *candidate*: the optimality conditions
checked by :mod:`fracvar.variational` are necessary, not sufficient.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .expr import DomainError, evaluate, parse_expression
from .fraccore import DEFAULT_QUADRATURE
from .functional import eval_composition, eval_term_functional
from .trajectory import FracPowerSeries, constrain_endpoints, free_coefficient_count
from .variational import el_residual

log = logging.getLogger(__name__)

STATIONARITY_TOL = 1e-4


class SolverError(RuntimeError):
    pass


class SingularJacobianError(SolverError):
    pass


class ConvergenceError(SolverError):
    pass


def default_basis(orders, count=2):
    beta = min(orders)
    return tuple(beta * k for k in range(1, count + 1))


@dataclass(frozen=True)
class RitzConfig:
    basis: tuple
    max_evals: int = 100_000
    tol: float = 1e-10
    restarts: int = 3
    seed: int = 0
    scale: float = 0.5

    def __post_init__(self):
        if not self.basis:
            raise ValueError("the Ritz basis needs at least one exponent")
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        object.__setattr__(self, "basis", tuple(float(e) for e in self.basis))


@dataclass
class SolveResult:
    trajectory: FracPowerSeries
    L: float
    F: list
    residual: object
    status: str
    evaluations: int = 0
    candidate: str = field(default="candidate", init=False)

    def to_dict(self):
        return {
            "candidate": self.candidate,
            "status": self.status,
            "L": self.L,
            "F": list(self.F),
            "trajectory": {"base": self.trajectory.a, "terms": self.trajectory.to_list()},
            "residual": self.residual.summary(),
            "evaluations": self.evaluations,
        }


# ------------------------------------------------------------ Nelder-Mead

def nelder_mead(func, simplex, tol, max_evals):
    """Minimise ``func`` from an initial simplex of shape (n+1, n).

    Stops when the simplex diameter drops to ``tol`` or after ``max_evals``
    evaluations.  Returns ``(x, f, evals, converged)``.
    """
    simplex = np.array(simplex, dtype=float)
    values = np.array([func(x) for x in simplex])
    evals = len(simplex)
    while True:
        order = np.argsort(values, kind="stable")
        simplex, values = simplex[order], values[order]
        diffs = simplex[:, None, :] - simplex[None, :, :]
        diameter = np.sqrt((diffs ** 2).sum(axis=-1)).max()
        if diameter <= tol:
            return simplex[0], values[0], evals, True
        if evals >= max_evals:
            return simplex[0], values[0], evals, False
        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = centroid + (centroid - worst)
        fr = func(xr)
        evals += 1
        if fr < values[0]:
            xe = centroid + 2.0 * (centroid - worst)
            fe = func(xe)
            evals += 1
            simplex[-1], values[-1] = (xe, fe) if fe < fr else (xr, fr)
            continue
        if fr < values[-2]:
            simplex[-1], values[-1] = xr, fr
            continue
        if fr < values[-1]:
            xc = centroid + 0.5 * (xr - centroid)
        else:
            xc = centroid + 0.5 * (worst - centroid)
        fc = func(xc)
        evals += 1
        if fc < min(fr, values[-1]):
            simplex[-1], values[-1] = xc, fc
            continue
        simplex[1:] = simplex[0] + 0.5 * (simplex[1:] - simplex[0])
        values[1:] = [func(x) for x in simplex[1:]]
        evals += len(simplex) - 1


def _initial_simplex(center, scale, rotation=None):
    n = center.size
    steps = scale * (np.eye(n) if rotation is None else rotation)
    return np.vstack([center, center + steps])


def _random_rotation(rng, n):
    qmat, rmat = np.linalg.qr(rng.standard_normal((n, n)))
    return qmat * np.sign(np.diag(rmat))


def solve_ritz(p, cfg=None, q=DEFAULT_QUADRATURE):
    """Direct minimisation (or maximisation) of ``L`` over a power basis."""
    if cfg is None:
        cfg = RitzConfig(default_basis(p.orders))
    sign = 1.0 if p.sense == "minimize" else -1.0
    n_free = free_coefficient_count(cfg.basis, p.left, p.right)
    if n_free < 0:
        raise ValueError("basis too small for the endpoint constraints")

    def build(c):
        return constrain_endpoints(c, cfg.basis, p.a, p.b, p.left, p.right)

    def objective(c):
        try:
            value = sign * eval_composition(p, build(c), q)[0]
        except (DomainError, ValueError, ZeroDivisionError):
            return math.inf
        return value if math.isfinite(value) else math.inf

    rng = np.random.default_rng(cfg.seed)
    best = np.zeros(n_free)
    best_f = objective(best)
    evals = 1
    any_converged = n_free == 0
    if n_free:
        for run in range(cfg.restarts + 1):
            budget = cfg.max_evals - evals
            if budget <= n_free + 1:
                break
            rotation = None if run == 0 else _random_rotation(rng, n_free)
            simplex = _initial_simplex(best, cfg.scale, rotation)
            x, fx, used, converged = nelder_mead(objective, simplex, cfg.tol, budget)
            evals += used
            any_converged |= converged
            log.debug("ritz run %d: f=%.12g evals=%d converged=%s", run, fx, used, converged)
            if fx <= best_f:
                best, best_f = x, fx
    if not math.isfinite(best_f):
        raise SolverError("the objective is undefined everywhere the search went")
    if n_free and any_converged:
        best, best_f, used = _polish(objective, best, best_f)
        evals += used
    x = build(best)
    L, F = eval_composition(p, x, q)
    report = el_residual(p, x, q=q, F=F)
    if not any_converged:
        status = "max-evals"
    else:
        defects = [report.sup_norm] + [abs(d) for d in (report.natural_left, report.natural_right)
                                       if d is not None]
        status = "converged" if max(defects) <= STATIONARITY_TOL else "stationarity-failed"
    return SolveResult(x, L, F, report, status, evals)


def _fd_gradient(func, x, h):
    g = np.empty(x.size)
    for j in range(x.size):
        e = np.zeros(x.size)
        e[j] = h * max(1.0, abs(x[j]))
        g[j] = (func(x + e) - func(x - e)) / (2.0 * e[j])
    return g


def _polish(func, x, fx, iterations=6, h=1e-5):
    """Newton steps on a central-difference gradient after the simplex search.

    Comparing function values only pins a smooth minimiser down to about
    sqrt(machine eps); the gradient sees it much more sharply.  A step is kept
    only if the objective does not rise above rounding noise.
    """
    evals = 0
    noise = 8 * np.finfo(float).eps * max(1.0, abs(fx))
    for _ in range(iterations):
        g = _fd_gradient(func, x, h)
        evals += 2 * x.size
        n = x.size
        hess = np.empty((n, n))
        for j in range(n):
            e = np.zeros(n)
            e[j] = h * max(1.0, abs(x[j]))
            hess[:, j] = (_fd_gradient(func, x + e, h) - _fd_gradient(func, x - e, h)) / (2 * e[j])
            evals += 4 * n
        hess = 0.5 * (hess + hess.T)
        if not np.all(np.isfinite(hess)) or not np.all(np.isfinite(g)):
            break
        try:
            step = np.linalg.solve(hess, -g)
        except np.linalg.LinAlgError:
            break
        trial = x + step
        ft = func(trial)
        evals += 1
        if not ft <= fx + noise:
            break
        x, fx = trial, min(ft, fx)
        if np.max(np.abs(step)) <= 1e-14 * max(1.0, np.max(np.abs(x))):
            break
    return x, fx, evals


# ---------------------------------------------------------- damped Newton

def _jacobian(fun, x, fx):
    n = x.size
    jac = np.empty((fx.size, n))
    for j in range(n):
        step = math.sqrt(np.finfo(float).eps) * max(1.0, abs(x[j]))
        xp = x.copy()
        xp[j] += step
        jac[:, j] = (np.asarray(fun(xp), dtype=float) - fx) / (xp[j] - x[j])
    return jac


def solve_self_consistent(residual_map, initial, tol=1e-12, max_iter=50,
                          damping=0.5, max_halvings=60):
    """Damped Newton iteration for ``residual_map(q) = 0``.

    The Jacobian is a forward-difference approximation; each step is halved
    until the residual max-norm decreases.
    """
    x = np.array(initial, dtype=float)
    fx = np.asarray(residual_map(x), dtype=float)
    norm = np.max(np.abs(fx))
    for it in range(max_iter):
        if norm <= tol:
            return x
        jac = _jacobian(residual_map, x, fx)
        try:
            step = np.linalg.solve(jac, -fx)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobianError(f"singular Jacobian at {x}") from exc
        if not np.all(np.isfinite(step)) or np.linalg.cond(jac) > 1e14:
            raise SingularJacobianError(f"singular Jacobian at {x}")
        lam = 1.0
        for _ in range(max_halvings + 1):
            trial = x + lam * step
            try:
                ft = np.asarray(residual_map(trial), dtype=float)
                nt = np.max(np.abs(ft))
            except (DomainError, ZeroDivisionError, ValueError):
                nt = math.inf
            if nt < norm:
                break
            lam *= damping
        else:
            raise ConvergenceError(f"no decrease along the Newton direction at {x}")
        x, fx, norm = trial, ft, nt
        log.debug("newton %d: |r|=%.3e lambda=%g", it, norm, lam)
    if norm <= tol:
        return x
    raise ConvergenceError(f"no convergence after {max_iter} iterations (|r|={norm:.3e})")


# ----------------------------------------------------- reference product problem

_REFERENCE_TERMS = ("v^2", "t^(1/2)*v")


def _matches(expr_a, source_b, rng):
    ref = parse_expression(source_b, ("t", "y", "v"))
    t = rng.uniform(0.05, 1.0, 16)
    y = rng.uniform(-2, 2, 16)
    v = rng.uniform(-2, 2, 16)
    env = {"t": t, "y": y, "v": v}
    return np.allclose(evaluate(expr_a, env), evaluate(ref, env), rtol=1e-13, atol=1e-13)


def is_reference_product_problem(p):
    """True for ``(int (x^(1/2))^2 (dt)^(1/2)) (int t^(1/2) x^(1/2) (dt)^(1/2))``
    on [0, 1] with ``x(0) = 0``, ``x(1) = 1``."""
    rng = np.random.default_rng(0)
    if (p.a, p.b, p.left, p.right, p.n) != (0.0, 1.0, 0.0, 1.0, 2):
        return False
    if any(term.alpha != 0.5 for term in p.terms):
        return False
    if not all(_matches(term.f, src, rng) for term, src in zip(p.terms, _REFERENCE_TERMS)):
        return False
    z = {"z1": rng.uniform(-2, 2, 8), "z2": rng.uniform(-2, 2, 8)}
    return np.allclose(evaluate(p.H, z), z["z1"] * z["z2"])


def q_trajectory(Q1, Q2):
    """Solution of ``(x^(1/2))^(1/2) = -Q1 sqrt(pi) / (4 Q2)``, ``x(0)=0``, ``x(1)=1``.

    ``x(t) = (2A/sqrt(pi)) t^(1/2) - (B pi / (2 sqrt(pi))) t`` with
    ``A = (Q1 pi + 4 sqrt(pi) Q2) / (8 Q2)`` and ``B = Q1 / (2 Q2)``.
    """
    if Q2 == 0:
        raise DomainError("Q2 = 0 is excluded: it forces Q1 = 0 as well")
    rp = math.sqrt(math.pi)
    A = (Q1 * math.pi + 4.0 * rp * Q2) / (8.0 * Q2)
    B = Q1 / (2.0 * Q2)
    return FracPowerSeries(0.0, ((2.0 * A / rp, 0.5), (-B * math.pi / (2.0 * rp), 1.0)))


def build_q_system(p, q=DEFAULT_QUADRATURE):
    """Map ``(Q1, Q2) -> (F1[x_Q] - Q1, F2[x_Q] - Q2)`` for the reference product problem."""
    if not is_reference_product_problem(p):
        raise ValueError("the Q-system is only derived for the reference product problem")
    term1, term2 = p.terms

    def residual_map(Qs):
        Q1, Q2 = (float(v) for v in Qs)
        x = q_trajectory(Q1, Q2)
        return np.array([
            eval_term_functional(term1, x, p.a, p.b, q) - Q1,
            eval_term_functional(term2, x, p.a, p.b, q) - Q2,
        ])

    return residual_map


def scan_roots(residual_map, starts, tol=1e-10, max_iter=50, distinct=1e-6):
    """Run Newton from every start; return the distinct roots found."""
    roots = []
    for s in starts:
        try:
            r = solve_self_consistent(residual_map, s, tol=tol, max_iter=max_iter)
        except (SolverError, DomainError):
            continue
        if all(np.max(np.abs(r - other)) > distinct for other in roots):
            roots.append(r)
    return roots


def q_grid_starts(lo=0.25, hi=2.0, step=0.25):
    values = np.arange(lo, hi + step / 2, step)
    return [(u, w) for u in values for w in values]
