"""Certifying verifier for discrete-time control barrier function candidates."""

from .convex_solver import ConvexSolution, Tolerances, solve
from .errors import (
    DimensionMismatchError,
    DomainError,
    DtcbfError,
    ExprSyntaxError,
    IterationLimitError,
    PolicyDomainError,
    UndeclaredVariableError,
    ValidationError,
)
from .expr import (
    ScalarField,
    differentiate,
    evaluate,
    interval_eval,
    interval_hessian,
    lambdify,
    parse,
    simplify,
    substitute,
    to_string,
)
from .global_optimizer import GlobalSolution, maximize_over_box, minimize_constrained
from .intervals import Box, Interval
from .problem import (
    Gamma,
    ProblemSpec,
    linear_f_expressions,
    load_problem,
    validate,
    zoh_discretize,
)
from .underestimator import AlphaVector, Underestimator, compute_alpha, max_separation
from .verifier import (
    CounterexampleReport,
    PiecewisePolicy,
    PolicyEntry,
    Subdomain,
    Verdict,
    VerifierConfig,
    VerifyStats,
    branch,
    check_counterexample,
    select_branch_dim,
    stopping_criteria,
    verify_known,
    verify_unknown,
)

__version__ = "0.1.0"

__all__ = [
    "AlphaVector",
    "Box",
    "ConvexSolution",
    "CounterexampleReport",
    "DimensionMismatchError",
    "DomainError",
    "DtcbfError",
    "ExprSyntaxError",
    "Gamma",
    "GlobalSolution",
    "Interval",
    "IterationLimitError",
    "PiecewisePolicy",
    "PolicyEntry",
    "ProblemSpec",
    "ScalarField",
    "Subdomain",
    "Tolerances",
    "UndeclaredVariableError",
    "Underestimator",
    "ValidationError",
    "Verdict",
    "VerifierConfig",
    "VerifyStats",
    "branch",
    "check_counterexample",
    "compute_alpha",
    "differentiate",
    "evaluate",
    "interval_eval",
    "interval_hessian",
    "lambdify",
    "linear_f_expressions",
    "load_problem",
    "max_separation",
    "maximize_over_box",
    "minimize_constrained",
    "parse",
    "select_branch_dim",
    "simplify",
    "solve",
    "stopping_criteria",
    "substitute",
    "to_string",
    "validate",
    "verify_known",
    "verify_unknown",
    "zoh_discretize",
]
