"""Cardinality-constrained optimization with proximal DC algorithms."""

from .core import (
    CARD_EPS,
    DcPenalty,
    FeasibleSet,
    IterationTrace,
    SmoothObjective,
    SolverConfig,
    TraceRecord,
    cardinality,
    estimate_lipschitz,
    finite_diff_gradient_check,
)
from .solvers import (
    CompositeProblem,
    SolveResult,
    apdca,
    iht,
    pdca_backtracking,
    pdca_extrapolation,
    pdca_fixed,
    penalized_problem,
    penalty_continuation,
    round_to_ksparse,
    sweep_rho,
)

__version__ = "0.1.0"
