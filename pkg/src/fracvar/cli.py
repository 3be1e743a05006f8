"""Command-line front end: ``fracvar {eval,residual,solve,selftest}``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .acceptance import format_table, run_all
from .expr import DomainError, ExprError
from .fraccore import DEFAULT_QUADRATURE, QuadratureConfig
from .functional import LagrangianTerm, eval_composition, make_problem
from .solver import (
    RitzConfig,
    SolverError,
    build_q_system,
    default_basis,
    is_reference_product_problem,
    q_grid_starts,
    scan_roots,
    solve_ritz,
    solve_self_consistent,
)
from .trajectory import FracPowerSeries
from .variational import DEFAULT_GRID, el_residual

log = logging.getLogger(__name__)

PROBLEM_KEYS = {"interval", "terms", "H", "boundary", "sense", "solver", "quadrature"}
SOLVER_KEYS = {"basis", "max_evals", "tol", "restarts", "seed"}
QUADRATURE_KEYS = {"nodes", "panels", "graded_levels"}


class ProblemFileError(ValueError):
    def __init__(self, field_name, message):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class ProblemFile:
    problem: object
    solver: dict = field(default_factory=dict)
    quadrature: QuadratureConfig = DEFAULT_QUADRATURE


def _number(value, name):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ProblemFileError(name, f"expected a finite number, got {value!r}")
    return float(value)


def _integer(value, name, minimum):
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ProblemFileError(name, f"expected an integer >= {minimum}, got {value!r}")
    return value


def _read_json(path, what):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ProblemFileError(what, f"cannot read {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(what, f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def problem_from_dict(data):
    """Validate a decoded problem file; every bad field raises ProblemFileError."""
    if not isinstance(data, dict):
        raise ProblemFileError("<root>", "expected a JSON object")
    unknown = set(data) - PROBLEM_KEYS
    if unknown:
        raise ProblemFileError(sorted(unknown)[0], "unknown key")
    for key in ("interval", "terms", "H"):
        if key not in data:
            raise ProblemFileError(key, "missing")

    interval = data["interval"]
    if not isinstance(interval, list) or len(interval) != 2:
        raise ProblemFileError("interval", "expected [a, b]")
    a = _number(interval[0], "interval[0]")
    b = _number(interval[1], "interval[1]")
    if not a < b:
        raise ProblemFileError("interval", f"need a < b, got [{a}, {b}]")

    raw_terms = data["terms"]
    if not isinstance(raw_terms, list) or not raw_terms:
        raise ProblemFileError("terms", "expected a non-empty list")
    terms = []
    for i, raw in enumerate(raw_terms):
        name = f"terms[{i}]"
        if not isinstance(raw, dict) or set(raw) != {"alpha", "f"}:
            raise ProblemFileError(name, "expected an object with keys 'alpha' and 'f'")
        alpha = _number(raw["alpha"], f"{name}.alpha")
        if not 0 < alpha <= 1:
            raise ProblemFileError(f"{name}.alpha", f"order {alpha} outside (0, 1]")
        if not isinstance(raw["f"], str):
            raise ProblemFileError(f"{name}.f", "expected expression text")
        try:
            terms.append(LagrangianTerm.parse(alpha, raw["f"]))
        except ExprError as exc:
            raise ProblemFileError(f"{name}.f", str(exc)) from exc

    H = data["H"]
    if not isinstance(H, str):
        raise ProblemFileError("H", "expected expression text")
    used = [int(k) for k in re.findall(r"\bz(\d+)\b", H)]
    if any(k < 1 or k > len(terms) for k in used):
        raise ProblemFileError("H", f"arity mismatch: H refers to z{max(used)} but there are {len(terms)} terms")

    boundary = data.get("boundary", {})
    if not isinstance(boundary, dict) or set(boundary) - {"left", "right"}:
        raise ProblemFileError("boundary", "expected an object with optional 'left' and 'right'")
    left = _number(boundary["left"], "boundary.left") if "left" in boundary else None
    right = _number(boundary["right"], "boundary.right") if "right" in boundary else None

    sense = data.get("sense", "minimize")
    if sense not in ("minimize", "maximize"):
        raise ProblemFileError("sense", f"expected 'minimize' or 'maximize', got {sense!r}")

    try:
        problem = make_problem(a, b, terms, H, left, right, sense)
    except ExprError as exc:
        raise ProblemFileError("H", str(exc)) from exc

    solver = data.get("solver", {})
    if not isinstance(solver, dict) or set(solver) - SOLVER_KEYS:
        raise ProblemFileError("solver", f"expected an object with keys from {sorted(SOLVER_KEYS)}")
    opts = {}
    if "basis" in solver:
        if not isinstance(solver["basis"], list) or not solver["basis"]:
            raise ProblemFileError("solver.basis", "expected a non-empty list of exponents")
        opts["basis"] = tuple(_number(e, "solver.basis") for e in solver["basis"])
    for key, minimum in (("max_evals", 1), ("restarts", 0), ("seed", 0)):
        if key in solver:
            opts[key] = _integer(solver[key], f"solver.{key}", minimum)
    if "tol" in solver:
        opts["tol"] = _number(solver["tol"], "solver.tol")
        if opts["tol"] <= 0:
            raise ProblemFileError("solver.tol", "must be positive")

    quad = data.get("quadrature", {})
    if not isinstance(quad, dict) or set(quad) - QUADRATURE_KEYS:
        raise ProblemFileError("quadrature", f"expected an object with keys from {sorted(QUADRATURE_KEYS)}")
    quad_opts = {}
    for key, minimum in (("nodes", 2), ("panels", 1), ("graded_levels", 0)):
        if key in quad:
            quad_opts[key] = _integer(quad[key], f"quadrature.{key}", minimum)
    return ProblemFile(problem, opts, QuadratureConfig(**quad_opts))


def read_problem_file(path):
    return problem_from_dict(_read_json(path, "problem"))


def load_problem(path):
    return read_problem_file(path).problem


def load_trajectory(path):
    """Read ``{"base": a, "terms": [[c, e], ...]}``, possibly nested under ``trajectory``."""
    data = _read_json(path, "trajectory")
    if isinstance(data, dict) and "trajectory" in data:
        data = data["trajectory"]
    if not isinstance(data, dict) or "terms" not in data:
        raise ProblemFileError("trajectory", "expected an object with 'base' and 'terms'")
    base = _number(data.get("base", 0.0), "trajectory.base")
    if not isinstance(data["terms"], list):
        raise ProblemFileError("terms", "expected a list of [coefficient, exponent] pairs")
    terms = []
    for i, pair in enumerate(data["terms"]):
        if not isinstance(pair, list) or len(pair) != 2:
            raise ProblemFileError(f"terms[{i}]", "expected [coefficient, exponent]")
        terms.append((_number(pair[0], f"terms[{i}][0]"), _number(pair[1], f"terms[{i}][1]")))
    if any(e < 0 for _, e in terms):
        raise ProblemFileError("terms", "exponents must be >= 0")
    return FracPowerSeries(base, terms)


def _fmt(x):
    return "none" if x is None else f"{x:.9g}"


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -------------------------------------------------------------- commands

def cmd_eval(args):
    pf = read_problem_file(args.problem)
    p, x = pf.problem, load_trajectory(args.trajectory)
    L, F = eval_composition(p, x, pf.quadrature)
    print(f"L = {_fmt(L)}")
    for i, value in enumerate(F, 1):
        print(f"F{i} = {_fmt(value)}")
    t = np.linspace(p.a, p.b, args.grid + 1)
    cols = [t, x(t)] + [x.derivative(alpha)(t) for alpha in p.orders]
    path = _out_dir(args) / "eval.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "x"] + [f"dx_{i}" for i in range(1, p.n + 1)])
        for row in zip(*cols):
            writer.writerow([f"{v:.9g}" for v in row])
    print(f"wrote {path}")
    return 0


def cmd_residual(args):
    pf = read_problem_file(args.problem)
    p, x = pf.problem, load_trajectory(args.trajectory)
    report = el_residual(p, x, args.grid, args.eps, pf.quadrature)
    path = _out_dir(args) / "residual.csv"
    report.to_csv(path)
    print(f"sup|R| = {_fmt(report.sup_norm)} on [{_fmt(p.a)}, {_fmt(p.b - report.eps)}]")
    print(f"sup|R| without the (b-t)^(alpha-1) kernel = {_fmt(report.unweighted_sup_norm)}")
    print(f"natural_left = {_fmt(report.natural_left)}")
    print(f"natural_right = {_fmt(report.natural_right)}")
    print(f"wrote {path}")
    return 0


def _q_system_roots(p, q):
    """Root of the self-consistency system from (1, 1) plus any others on a coarse grid."""
    residual_map = build_q_system(p, q)
    root = solve_self_consistent(residual_map, [1.0, 1.0])
    found = scan_roots(residual_map, [tuple(root)] + q_grid_starts())
    others = [r for r in found if np.max(np.abs(r - root)) > 1e-6]
    return {"root": root.tolist(), "alternative_roots": [r.tolist() for r in others]}


def cmd_solve(args):
    pf = read_problem_file(args.problem)
    p = pf.problem
    opts = dict(pf.solver)
    if args.basis:
        opts["basis"] = tuple(float(e) for e in args.basis.split(","))
    if args.seed is not None:
        opts["seed"] = args.seed
    opts.setdefault("basis", default_basis(p.orders))
    result = solve_ritz(p, RitzConfig(**opts), pf.quadrature)
    payload = result.to_dict()
    if is_reference_product_problem(p):
        payload["q_system"] = _q_system_roots(p, pf.quadrature)
    out = _out_dir(args)
    (out / "result.json").write_text(json.dumps(payload, indent=2))
    result.residual.to_csv(out / "residual.csv")
    print(f"status = {result.status} ({result.candidate})")
    print(f"L = {_fmt(result.L)}")
    for i, value in enumerate(result.F, 1):
        print(f"F{i} = {_fmt(value)}")
    shown = " + ".join(f"{_fmt(c)}*(t-{_fmt(p.a)})^{_fmt(e)}" for c, e in result.trajectory.terms)
    shown = shown.replace("+ -", "- ")
    print(f"trajectory = {shown or 0}")
    print(f"sup|R| = {_fmt(result.residual.sup_norm)}")
    if "q_system" in payload:
        qs = payload["q_system"]
        print(f"Q-system root from (1, 1) = ({_fmt(qs['root'][0])}, {_fmt(qs['root'][1])})")
        for r in qs["alternative_roots"]:
            print(f"  alternative root = ({_fmt(r[0])}, {_fmt(r[1])})")
    print(f"wrote {out / 'result.json'} and {out / 'residual.csv'}")
    return 0


def cmd_selftest(args):
    q = QuadratureConfig(args.nodes, args.panels, args.graded_levels)
    results = run_all(q)
    print(format_table(results))
    return 0 if all(r.passed for r in results) else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="fracvar", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, trajectory=True):
        p.add_argument("--problem", required=True, help="problem file (JSON)")
        if trajectory:
            p.add_argument("--trajectory", required=True, help="trajectory file (JSON)")
        p.add_argument("--out", default=".", help="output directory")

    p_eval = sub.add_parser("eval", help="evaluate L and F along a trajectory")
    common(p_eval)
    p_eval.add_argument("--grid", type=int, default=DEFAULT_GRID)
    p_eval.set_defaults(func=cmd_eval)

    p_res = sub.add_parser("residual", help="Euler-Lagrange and natural-condition residuals")
    common(p_res)
    p_res.add_argument("--grid", type=int, default=DEFAULT_GRID)
    p_res.add_argument("--eps", type=float, default=None, help="default (b-a)*1e-3")
    p_res.set_defaults(func=cmd_residual)

    p_solve = sub.add_parser("solve", help="direct Ritz search for a candidate extremizer")
    common(p_solve, trajectory=False)
    p_solve.add_argument("--basis", help="comma-separated basis exponents")
    p_solve.add_argument("--seed", type=int, default=None)
    p_solve.set_defaults(func=cmd_solve)

    p_self = sub.add_parser("selftest", help="run the acceptance checks")
    p_self.add_argument("--nodes", type=int, default=DEFAULT_QUADRATURE.nodes)
    p_self.add_argument("--panels", type=int, default=DEFAULT_QUADRATURE.panels)
    p_self.add_argument("--graded-levels", type=int, default=DEFAULT_QUADRATURE.graded_levels)
    p_self.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (ProblemFileError, DomainError, SolverError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
