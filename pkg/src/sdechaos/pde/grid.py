"""Uniform tensor grids on a truncated box, grid fields, and file formats.

The domain is the cube [-R_dom, R_dom]^d discretized with ``n_per_axis``
points per axis. Grid functions are stored flat in C (point-major) order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = ["Grid", "GridError", "make_grid", "DiscreteField",
           "write_field_binary", "read_field_binary", "write_field_csv"]

MIN_POINTS_PER_AXIS = 16
DEFAULT_POINT_BUDGET = 4_000_000


class GridError(ValueError):
    """Grid construction outside the supported envelope."""


@dataclass(frozen=True)
class Grid:
    """Uniform grid over [-R_dom, R_dom]^d with n_per_axis points per axis."""

    d: int
    R_dom: float
    n_per_axis: int

    @property
    def h(self):
        return 2.0 * self.R_dom / (self.n_per_axis - 1)

    @property
    def shape(self):
        return (self.n_per_axis,) * self.d

    @property
    def n_total(self):
        return self.n_per_axis**self.d

    @cached_property
    def axis(self):
        return np.linspace(-self.R_dom, self.R_dom, self.n_per_axis)

    @cached_property
    def points(self):
        """All grid points, shape (n_total, d), C order."""
        mesh = np.meshgrid(*([self.axis] * self.d), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @cached_property
    def interior_mask(self):
        """Flat boolean mask of strictly interior points."""
        idx = np.unravel_index(np.arange(self.n_total), self.shape)
        mask = np.ones(self.n_total, dtype=bool)
        for coord in idx:
            mask &= (coord > 0) & (coord < self.n_per_axis - 1)
        return mask

    @cached_property
    def boundary_layer_mask(self):
        """Interior points adjacent to the boundary (the leak-monitor ring)."""
        idx = np.unravel_index(np.arange(self.n_total), self.shape)
        on_ring = np.zeros(self.n_total, dtype=bool)
        for coord in idx:
            on_ring |= (coord == 1) | (coord == self.n_per_axis - 2)
        return on_ring & self.interior_mask

    def flat_index(self, multi):
        return int(np.ravel_multi_index(multi, self.shape))

    def nearest_index(self, x):
        """Flat index of the grid point nearest to x."""
        x = np.asarray(x, dtype=float)
        multi = np.clip(np.rint((x + self.R_dom) / self.h).astype(int), 0, self.n_per_axis - 1)
        return self.flat_index(tuple(multi))

    def interpolation_weights(self, x, order=2):
        """Tensor Lagrange interpolation stencil at points x.

        ``order`` is the number of points per axis: 2 gives multilinear,
        4 gives cubic (the choice for probe anchors, where the bilinear
        O(h^2) error would dominate the answer). Returns (indices,
        weights) of shape (N, order^d).
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n, h = self.n_per_axis, self.h
        rel = (x + self.R_dom) / h
        lo = np.clip(np.floor(rel).astype(int) - (order // 2 - 1), 0, n - order)
        npts = x.shape[0]
        # per-axis Lagrange weights on the window lo .. lo+order-1
        axis_w = np.empty((npts, self.d, order))
        for a in range(order):
            w = np.ones((npts, self.d))
            for b in range(order):
                if b == a:
                    continue
                w *= (rel - (lo + b)) / float(a - b)
            axis_w[:, :, a] = w
        stencil = order**self.d
        idx = np.empty((npts, stencil), dtype=np.int64)
        wts = np.ones((npts, stencil))
        for c in range(stencil):
            multi = []
            rem = c
            for k in range(self.d):
                o = rem % order
                rem //= order
                multi.append(lo[:, k] + o)
                wts[:, c] *= axis_w[:, k, o]
            idx[:, c] = np.ravel_multi_index(multi, self.shape)
        return idx, wts

    def interpolate(self, values, x, order=2):
        """Tensor Lagrange interpolation of flat grid values at points x."""
        single = np.asarray(x).ndim == 1
        idx, wts = self.interpolation_weights(x, order=order)
        values = np.asarray(values)
        if values.ndim == 1:
            out = np.sum(values[idx] * wts, axis=1)
        else:
            out = np.einsum("pc...,pc->p...", values[idx], wts)
        return out[0] if single else out

    def gradient(self, values):
        """Fourth-order central differences, degrading to second-order
        central and then one-sided stencils in the two boundary layers.

        Parameters
        ----------
        values : flat array (n_total,) or (n_total, m) batch of fields.

        Returns
        -------
        (n_total, d) or (n_total, d, m) array.
        """
        values = np.asarray(values)
        batch = values.ndim == 2
        m = values.shape[1] if batch else 1
        cube = values.reshape(self.shape + (m,))
        h = self.h
        out = np.empty((self.n_total, self.d, m))
        for ax in range(self.d):
            u = np.moveaxis(cube, ax, 0)
            g = np.empty_like(u)
            g[2:-2] = (u[:-4] - 8.0 * u[1:-3] + 8.0 * u[3:-1] - u[4:]) / (12.0 * h)
            g[1] = (u[2] - u[0]) / (2.0 * h)
            g[-2] = (u[-1] - u[-3]) / (2.0 * h)
            g[0] = (u[1] - u[0]) / h
            g[-1] = (u[-1] - u[-2]) / h
            out[:, ax, :] = np.moveaxis(g, 0, ax).reshape(self.n_total, m)
        return out if batch else out[:, :, 0]


def make_grid(d, R_dom, n_per_axis, point_budget=DEFAULT_POINT_BUDGET):
    """Validated grid constructor.

    Raises
    ------
    GridError
        On non-positive arguments, fewer than 16 points per axis, or a
        total point count beyond the memory budget.
    """
    if d < 1 or R_dom <= 0 or n_per_axis <= 0:
        raise GridError("d, R_dom and n_per_axis must be positive")
    if n_per_axis < MIN_POINTS_PER_AXIS:
        raise GridError(f"n_per_axis must be >= {MIN_POINTS_PER_AXIS}")
    if n_per_axis**d > point_budget:
        raise GridError(
            f"grid with {n_per_axis}^{d} points exceeds the budget of {point_budget}"
        )
    return Grid(int(d), float(R_dom), int(n_per_axis))


@dataclass(frozen=True)
class DiscreteField:
    """A grid function: flat values (real or complex) over grid points."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.shape != (self.grid.n_total,):
            raise GridError(
                f"value count {values.shape} does not match grid ({self.grid.n_total},)"
            )
        if not np.all(np.isfinite(values)):
            raise GridError("grid field contains non-finite entries")
        object.__setattr__(self, "values", values)

    def at(self, x):
        return self.grid.interpolate(self.values, x)

    def max_abs(self):
        return float(np.max(np.abs(self.values)))


def field_from_function(grid, func):
    """Sample a vectorized function of (N, d) points onto the grid."""
    return DiscreteField(grid, np.asarray(func(grid.points), dtype=float))


def write_field_binary(field, path):
    """Flat binary layout: little-endian int64 d, int64 n_per_axis,
    float64 R_dom, then point-major float64 values."""
    g = field.grid
    with open(path, "wb") as fh:
        fh.write(struct.pack("<qqd", g.d, g.n_per_axis, g.R_dom))
        fh.write(np.asarray(field.values, dtype="<f8").tobytes())


def read_field_binary(path):
    with open(path, "rb") as fh:
        d, n, R = struct.unpack("<qqd", fh.read(24))
        values = np.frombuffer(fh.read(), dtype="<f8")
    grid = Grid(int(d), float(R), int(n))
    if values.shape[0] != grid.n_total:
        raise GridError(
            f"file holds {values.shape[0]} values, grid header implies {grid.n_total}"
        )
    return DiscreteField(grid, values.copy())


def write_field_csv(field, path, max_points=200_000):
    """Point-per-row CSV (x1,...,xd,value) for small grids."""
    g = field.grid
    if g.n_total > max_points:
        raise GridError(f"grid too large for CSV export ({g.n_total} points)")
    header = ",".join(f"x{i + 1}" for i in range(g.d)) + ",value"
    data = np.column_stack([g.points, np.asarray(field.values, dtype=float)])
    np.savetxt(path, data, delimiter=",", header=header, comments="")
