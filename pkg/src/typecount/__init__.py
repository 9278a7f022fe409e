"""Counting potential-outcome types in a two-arm binary-outcome trial."""

from .core import (
    CellMatrix,
    Design,
    DomainError,
    EstimateResult,
    GroupCounts,
    TypeCounts,
    cell_matrix_from_free_vars,
    reduced_form,
    structural_zero_mask,
)
from .likelihood import log_binom_pmf, log_likelihood
from .lsq import LsqConfig, objective, solve
from .mle import MleConfig, mle_exact, mle_heuristic
from .resampling import bootstrap, monte_carlo, simulate_experiment

__all__ = [
    "CellMatrix",
    "Design",
    "DomainError",
    "EstimateResult",
    "GroupCounts",
    "LsqConfig",
    "MleConfig",
    "TypeCounts",
    "bootstrap",
    "cell_matrix_from_free_vars",
    "log_binom_pmf",
    "log_likelihood",
    "mle_exact",
    "mle_heuristic",
    "monte_carlo",
    "objective",
    "reduced_form",
    "simulate_experiment",
    "solve",
    "structural_zero_mask",
]
