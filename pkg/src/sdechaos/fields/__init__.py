"""Coefficient fields (sigma, b): built-in examples, mollification, diagnostics."""

from .bumps import Mollifier, cutoff_bump, cutoff_bump_gradient
from .core import (
    BUILTIN_IDS,
    CoefficientField,
    FieldError,
    builtin_field,
    directional_derivative,
    mollify,
)
from .diagnostics import (
    EllipticityReport,
    LdNormReport,
    ellipticity_check,
    ld_norm,
    oscillation_modulus,
)
from .expressions import compile_expression, field_from_expressions
from .serialization import field_from_config, field_to_config

__all__ = [
    "BUILTIN_IDS",
    "CoefficientField",
    "EllipticityReport",
    "FieldError",
    "LdNormReport",
    "Mollifier",
    "builtin_field",
    "compile_expression",
    "cutoff_bump",
    "cutoff_bump_gradient",
    "directional_derivative",
    "ellipticity_check",
    "field_from_config",
    "field_from_expressions",
    "field_to_config",
    "ld_norm",
    "mollify",
    "oscillation_modulus",
]
