"""Finite-difference assembly of L = (1/2) a^{ij} D_ij + b^i D_i.

Central second differences for all second derivatives (the 4-point cross
stencil for mixed ones), central first differences for the drift, zero
Dirichlet rows on the box boundary. The stencil is exact on quadratics for
constant a and annihilates constants at interior points.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .grid import Grid, GridError

__all__ = ["DiscreteOperatorContext", "assemble_generator", "OperatorError"]

CROSS_TOL = 1e-14


class OperatorError(RuntimeError):
    """Raised on invalid coefficients during assembly."""


@dataclass(frozen=True)
class DiscreteOperatorContext:
    """Assembled generator on a grid, immutable after construction.

    Attributes
    ----------
    matrix : csr_matrix
        The discrete generator with zero rows at boundary points.
    drift_cap : float
        Component-wise clamp applied to the drift (0 means uncapped).
    clamped_fraction : float
        Fraction of interior grid points where the clamp was active.
    """

    grid: Grid
    field: object
    matrix: sp.csr_matrix
    drift_cap: float
    clamped_fraction: float
    _extras: dict = dc_field(default_factory=dict, repr=False, compare=False)

    @cached_property
    def sigma_at_points(self):
        """sigma at the grid points, shape (n_total, d, d1)."""
        return self.field.sigma_fn(self.grid.points)

    @cached_property
    def matrix_T(self):
        return self.matrix.T.tocsr()

    def apply(self, values):
        return self.matrix @ np.asarray(values)


def assemble_generator(field, grid, drift_cap=None):
    """Assemble the generator of ``field`` on ``grid``.

    Parameters
    ----------
    drift_cap : float or None
        Component-wise magnitude clamp for b on the grid. None selects the
        default 1/h (an unbounded drift cannot be represented at grid
        resolution); pass 0 to disable clamping.
    """
    if field.d != grid.d:
        raise GridError(f"field dimension {field.d} != grid dimension {grid.d}")
    if drift_cap is None:
        drift_cap = 1.0 / grid.h
    drift_cap = float(drift_cap)

    pts = grid.points
    a = field.a(pts)
    b = field.drift_fn(pts)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise OperatorError("non-finite coefficient at a grid point")

    clamped = 0.0
    if drift_cap > 0:
        over = np.abs(b) > drift_cap
        clamped = float(np.mean(np.any(over, axis=1)[grid.interior_mask]))
        b = np.clip(b, -drift_cap, drift_cap)

    d, n, h = grid.d, grid.n_per_axis, grid.h
    n_total = grid.n_total
    strides = np.array([n**k for k in range(d - 1, -1, -1)], dtype=np.int64)
    interior = np.flatnonzero(grid.interior_mask)

    rows, cols, vals = [], [], []

    def add(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    diag = np.zeros(len(interior))
    for i in range(d):
        aii = a[interior, i, i]
        bi = b[interior, i]
        diag -= aii / h**2
        add(interior, interior + strides[i], aii / (2 * h**2) + bi / (2 * h))
        add(interior, interior - strides[i], aii / (2 * h**2) - bi / (2 * h))
        for j in range(i + 1, d):
            aij = a[interior, i, j]
            if np.max(np.abs(aij)) <= CROSS_TOL:
                continue
            c = aij / (4 * h**2)
            add(interior, interior + strides[i] + strides[j], c)
            add(interior, interior - strides[i] - strides[j], c)
            add(interior, interior + strides[i] - strides[j], -c)
            add(interior, interior - strides[i] + strides[j], -c)
    add(interior, interior, diag)

    matrix = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_total, n_total),
    ).tocsr()
    return DiscreteOperatorContext(grid, field, matrix, drift_cap, clamped)
