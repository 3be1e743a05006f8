"""Composition functionals of Jumarie fractional integrals.

Evaluate ``L[x] = H(F_1[x], ..., F_n[x])``, check its Euler-Lagrange and
natural boundary conditions, and search for candidate extremizers.
"""
from .expr import DomainError, ExprError, differentiate, evaluate, parse_expression
from .fraccore import (
    QuadratureConfig,
    SampledFunction,
    check_integration_by_parts,
    frac_derivative_power,
    frac_derivative_sampled,
    frac_integral,
    gamma,
)
from .functional import (
    CompositionProblem,
    LagrangianTerm,
    eval_composition,
    eval_term_functional,
    make_problem,
    make_product,
    make_quotient,
)
from .solver import RitzConfig, SolveResult, build_q_system, solve_ritz, solve_self_consistent
from .trajectory import FracPowerSeries, constrain_endpoints, trajectory_norm
from .variational import (
    ResidualReport,
    corollary_residual_product,
    corollary_residual_quotient,
    el_residual,
    natural_bc_defects,
)

__version__ = "0.1.0"
