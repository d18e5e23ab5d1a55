"""Discretized generator, semigroup, resolvent, gradient channels, oracle."""

from .contour import (
    ContourError,
    ContourTable,
    contour_semigroup,
    load_contour_csv,
    parabolic_contour,
    resolvent_solve,
    save_contour_csv,
)
from .fourier import FourierOracle, GaussianFunction, OracleError
from .grid import (
    DiscreteField,
    Grid,
    GridError,
    field_from_function,
    make_grid,
    read_field_binary,
    write_field_binary,
    write_field_csv,
)
from .operator import DiscreteOperatorContext, OperatorError, assemble_generator
from .semigroup import (
    AdjointLadder,
    SemigroupCache,
    SemigroupEvolver,
    evolve_semigroup,
    q_operator,
)
from .solvers import LinearSolve, SolverError

__all__ = [
    "AdjointLadder",
    "ContourError",
    "ContourTable",
    "DiscreteField",
    "DiscreteOperatorContext",
    "FourierOracle",
    "GaussianFunction",
    "Grid",
    "GridError",
    "LinearSolve",
    "OperatorError",
    "OracleError",
    "SemigroupCache",
    "SemigroupEvolver",
    "SolverError",
    "assemble_generator",
    "contour_semigroup",
    "evolve_semigroup",
    "field_from_function",
    "load_contour_csv",
    "make_grid",
    "parabolic_contour",
    "q_operator",
    "read_field_binary",
    "resolvent_solve",
    "save_contour_csv",
    "write_field_binary",
    "write_field_csv",
]
