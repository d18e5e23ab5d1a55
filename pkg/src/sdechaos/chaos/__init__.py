"""Chaos kernels, simplex quadrature, and the strong-solvability criterion."""

from .criterion import (
    CriterionState,
    NormIdentityReport,
    chaos_level_integral,
    classify_sequence,
    criterion_remainder,
    criterion_sequence,
    laplace_criterion,
    norm_identity_check,
)
from .engine import ChaosEngine, enumerate_multi_indices
from .kernels import ChaosKernel, KernelTable, times_to_durations
from .simplex import IntegrationResult, cube_to_simplex, ordered_gl_rule, simplex_integrate

__all__ = [
    "ChaosEngine",
    "ChaosKernel",
    "CriterionState",
    "IntegrationResult",
    "KernelTable",
    "NormIdentityReport",
    "chaos_level_integral",
    "classify_sequence",
    "criterion_remainder",
    "criterion_sequence",
    "cube_to_simplex",
    "enumerate_multi_indices",
    "laplace_criterion",
    "norm_identity_check",
    "ordered_gl_rule",
    "simplex_integrate",
    "times_to_durations",
]
