"""Finite-difference solver and Monte-Carlo verifier for Nash payoffs of
two-player Markovian stochastic differential games."""

from .dsl import Expr, ParseError, EvalError, parse, evaluate, evaluate_array, free_vars, to_source
from .feedback import (FeedbackResolver, GicReport, ResolveError, check_gic,
                       default_resolver, hamiltonian, resolve_feedback,
                       resolve_feedback_batch, smoothed_heaviside)
from .games import (ControlSet, DiffusionMatrixField, GameSpec, GameSpecError,
                    ValidationReport, builtin_scenario, scenario_names, validate_spec)
from .pde import (Grid, SolveDiagnostics, SolverError, StabilityReport, ValueField,
                  expanding_domain_solve, growth_check, linear_parabolic_solve,
                  max_principle_check, picard_solve, residual)
from .montecarlo import (DeviationRow, DeviationStrategy, GirsanovReport,
                         McOptions, NashReport, PayoffEstimate, TrajectoryBatch,
                         ValueMatchReport, default_deviations, deviation_test,
                         estimate_payoff, girsanov_consistency, simulate_paths,
                         value_match_test)

__version__ = "0.1.0"

__all__ = [
    "Expr", "ParseError", "EvalError", "parse", "evaluate", "evaluate_array",
    "free_vars", "to_source",
    "FeedbackResolver", "GicReport", "ResolveError", "check_gic",
    "default_resolver", "hamiltonian", "resolve_feedback",
    "resolve_feedback_batch", "smoothed_heaviside",
    "ControlSet", "DiffusionMatrixField", "GameSpec", "GameSpecError",
    "ValidationReport", "builtin_scenario", "scenario_names", "validate_spec",
    "Grid", "SolveDiagnostics", "SolverError", "StabilityReport", "ValueField",
    "expanding_domain_solve", "growth_check", "linear_parabolic_solve",
    "max_principle_check", "picard_solve", "residual",
    "DeviationRow", "DeviationStrategy", "GirsanovReport", "McOptions",
    "NashReport", "PayoffEstimate", "TrajectoryBatch", "ValueMatchReport",
    "default_deviations", "deviation_test", "estimate_payoff",
    "girsanov_consistency", "simulate_paths", "value_match_test",
    "__version__",
]
