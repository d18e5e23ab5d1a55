"""Iterated-operator chaos kernels and their tabulated fast evaluators.

A kernel of order m with noise word (k_1, ..., k_m) maps ordered times
t > t_1 > ... > t_m > 0 to T_{t_m} Q^{k_m}_{t_{m-1}-t_m} ... Q^{k_1}_{t-t_1} f(x0).
Point evaluations go through the engine; Monte Carlo integration against
paths uses :class:`KernelTable`, kernel values tabulated on an ordered grid
in the coordinates (t_1, t_2/t_1, ...) and interpolated multilinearly.
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import RegularGridInterpolator

__all__ = ["ChaosKernel", "KernelTable", "times_to_durations"]


def times_to_durations(t, times):
    """Map ordered times (N, m) to stage durations and the outer time.

    Stage durations are (t - t_1, t_1 - t_2, ..., t_{m-1} - t_m); the outer
    semigroup factor runs for t_m.
    """
    times = np.atleast_2d(np.asarray(times, dtype=float))
    n, m = times.shape
    if m == 0:
        return np.zeros((n, 0)), np.full(n, float(t))
    dur = np.empty_like(times)
    dur[:, 0] = t - times[:, 0]
    if m > 1:
        dur[:, 1:] = times[:, :-1] - times[:, 1:]
    final = times[:, -1]
    if np.any(dur < -1e-12) or np.any(final < -1e-12):
        raise ValueError("times must satisfy t > t_1 > ... > t_m > 0")
    return np.clip(dur, 0.0, None), np.clip(final, 0.0, None)


class ChaosKernel:
    """Point evaluator for one multi-index word at a fixed anchor.

    For m = 0 the kernel degenerates to t -> T_t f(x0).
    """

    def __init__(self, engine, m, multi_index, t):
        multi_index = tuple(int(k) for k in multi_index)
        if m < 0:
            raise ValueError("kernel order must be >= 0")
        if len(multi_index) != m:
            raise ValueError(f"multi-index length {len(multi_index)} != order {m}")
        d1 = engine.ctx.field.d1
        if any(not 0 <= k < d1 for k in multi_index):
            raise ValueError(f"noise indices must lie in 0..{d1 - 1}")
        if t <= 0 or t > engine.t_cap + 1e-12:
            raise ValueError("horizon t must lie in (0, t_cap]")
        self.engine = engine
        self.m = m
        self.multi_index = multi_index
        self.t = float(t)

    def evaluate_batch(self, times):
        """Kernel values at a batch of ordered time tuples, shape (N,)."""
        durations, final = times_to_durations(self.t, times)
        if self.m == 0:
            return self.engine.evaluate(durations, final, 0, "kernel")
        vals = self.engine.word_values(durations, final, [self.multi_index])
        return vals[:, 0]

    def evaluate(self, times=()):
        return float(self.evaluate_batch(np.atleast_2d(np.asarray(times, dtype=float))))


class KernelTable:
    """All-multi-index kernel values on an ordered grid, with interpolation.

    The grid uses ratio coordinates: t_1 in [0, t] and r_j = t_j / t_{j-1}
    in [0, 1], which turn the ordered region into a box. Construction
    shares evolution passes: for each fixed prefix the next time axis is
    swept with one snapshot-collecting march.
    """

    def __init__(self, engine, t, m, shape=None):
        if m < 1:
            raise ValueError("tables are built for kernel order >= 1")
        self.engine = engine
        self.t = float(t)
        self.m = m
        d1 = engine.ctx.field.d1
        self.multis = [tuple(idx) for idx in np.ndindex(*([d1] * m))]
        if shape is None:
            shape = {1: (129,), 2: (21, 13), 3: (13, 9, 7)}.get(m)
            if shape is None:
                raise ValueError("default tables cover orders 1..3")
        self.axes = [np.linspace(0.0, 1.0, s) for s in shape]
        self.values = self._build(shape)
        self._interp = RegularGridInterpolator(
            tuple(self.axes), self.values, method="linear",
            bounds_error=False, fill_value=None,
        )

    def _build(self, shape):
        eng = self.engine
        grid = eng.grid
        sig = eng.ctx.sigma_at_points
        d1 = eng.ctx.field.d1
        t = self.t
        out = np.empty(tuple(shape) + (len(self.multis),))

        def final_reduce(cols_block, t_final):
            # cols_block: (n_total, n_cols); values of T_{t_final} col (x0)
            return eng.ladder.value(t_final, cols_block)

        if self.m == 1:
            for i, u in enumerate(self.axes[0]):
                t1 = u * t
                grad = eng.cache.gradient_at(t - t1)
                cols = np.stack(
                    [np.sum(sig[:, :, k] * grad, axis=1) for k in range(d1)], axis=1
                )
                out[i] = final_reduce(cols, t1)
            return out

        # m >= 2: iterate prefixes, sweep the innermost axis with snapshots
        def sweep(prefix_cols, t_prev, level, index_prefix):
            """prefix_cols: (n_total, d1^{level-1}) fields after level-1 stages."""
            axis = self.axes[level - 1]
            spans = [float(t_prev - r * t_prev) for r in axis]
            snaps = eng.evolver.evolve_values(
                prefix_cols, max(spans), dt=eng.dt, snapshot_times=set(spans)
            )
            for j, r in enumerate(axis):
                t_level = r * t_prev
                block = snaps[spans[j]]
                grads = grid.gradient(block)
                new_cols = np.empty((grid.n_total, block.shape[1] * d1))
                for k in range(d1):
                    new_cols[:, k::d1] = np.einsum(
                        "ndc,nd->nc", grads, sig[:, :, k]
                    )
                if level == self.m:
                    out[index_prefix + (j,)] = final_reduce(new_cols, t_level)
                else:
                    sweep(new_cols, t_level, level + 1, index_prefix + (j,))

        for i, u in enumerate(self.axes[0]):
            t1 = u * t
            grad = eng.cache.gradient_at(t - t1)
            cols = np.stack(
                [np.sum(sig[:, :, k] * grad, axis=1) for k in range(d1)], axis=1
            )
            sweep(cols, t1, 2, (i,))
        return out

    def _coords(self, times):
        times = np.atleast_2d(np.asarray(times, dtype=float))
        coords = np.empty_like(times)
        coords[:, 0] = times[:, 0] / self.t
        prev = times[:, 0]
        for j in range(1, self.m):
            safe = np.where(prev > 1e-300, prev, 1.0)
            coords[:, j] = np.where(prev > 1e-300, times[:, j] / safe, 0.0)
            prev = times[:, j]
        return np.clip(coords, 0.0, 1.0)

    def __call__(self, times):
        """Interpolated kernel values, shape (N, n_multi)."""
        return self._interp(self._coords(times))

    def column(self, multi_index):
        """Fast evaluator for one multi-index: times (N, m) -> (N,) values."""
        j = self.multis.index(tuple(multi_index))
        return lambda times: self(times)[:, j]
