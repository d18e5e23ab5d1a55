"""Semigroup evolution T_t and the gradient channels Q_t^k on a grid.

Time stepping is Crank-Nicolson with a Rannacher startup (two implicit-Euler
half steps) to damp oscillations from rough initial data. One factorization
per (step size, direction) pair is cached and reused, and blocks of
right-hand sides evolve together.

Two amortization devices used throughout the chaos machinery live here:

* :class:`SemigroupCache` -- snapshots of T_t f and its gradient on a
  geometric time ladder, interpolated linearly in sqrt(t).
* :class:`AdjointLadder` -- the transposed evolution applied to the
  interpolation stencil of a probe point, so that T_t g(x0) for many fields
  g costs one dot product each.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .grid import DiscreteField
from .solvers import LinearSolve, SolverError

__all__ = ["SemigroupEvolver", "SemigroupCache", "AdjointLadder",
            "evolve_semigroup", "q_operator"]

LEAK_THRESHOLD = 1e-6
LADDER_RATIO = 2.0 ** 0.25


def _steps_for(duration, dt):
    return int(round(duration / dt))


class SemigroupEvolver:
    """Time-stepping engine bound to one assembled operator context."""

    def __init__(self, ctx, solver_tol=1e-10):
        self.ctx = ctx
        self.grid = ctx.grid
        self.solver_tol = solver_tol
        self._factors = {}
        self.leak_events = []

    # -- factorization cache -------------------------------------------------

    def _cn(self, dt, adjoint=False):
        key = (float(dt), bool(adjoint))
        if key not in self._factors:
            L = self.ctx.matrix_T if adjoint else self.ctx.matrix
            eye = sp.identity(L.shape[0], format="csr")
            m_minus = (eye - (dt / 2.0) * L).tocsr()
            m_plus = (eye + (dt / 2.0) * L).tocsr()
            self._factors[key] = (LinearSolve(m_minus, tol=self.solver_tol), m_plus)
        return self._factors[key]

    # -- forward evolution -----------------------------------------------------

    def evolve_values(self, values, t, dt=None, snapshot_steps=None,
                      snapshot_times=None, adjoint=False):
        """March flat values (or an (n, m) block) forward by time t.

        The first step of size dt is replaced by two implicit-Euler half
        steps; the remaining steps are Crank-Nicolson. ``snapshot_steps``
        collects copies at whole steps (dict step -> array);
        ``snapshot_times`` collects at arbitrary times (dict time -> array)
        by blending the bracketing steps linearly, which removes the
        first-order step-snapping error.
        """
        values = np.asarray(values, dtype=float)
        if t < 0:
            raise ValueError("t must be >= 0")
        if dt is None:
            dt = t / 256.0 if t > 0 else 1.0

        frac = {}
        if snapshot_times is not None:
            for tq in snapshot_times:
                k = int(np.floor(tq / dt + 1e-12))
                theta = tq / dt - k
                if theta < 1e-9:
                    frac[tq] = (k, k, 0.0)
                else:
                    frac[tq] = (k, k + 1, theta)
        wanted = set(snapshot_steps or ())
        for k0, k1, _ in frac.values():
            wanted.update((k0, k1))
        n_steps = _steps_for(t, dt) if t > 0 else 0
        if frac:
            n_steps = max(n_steps, max(k1 for _, k1, _ in frac.values()))

        collecting = snapshot_steps is not None or snapshot_times is not None
        stash = {}
        if collecting and (0 in wanted or not wanted):
            stash[0] = values.copy()
        if n_steps > 0:
            solver, m_plus = self._cn(dt, adjoint)
            u = values.copy()
            for step in range(1, n_steps + 1):
                if step == 1:
                    u = solver.solve(solver.solve(u))
                else:
                    u = solver.solve(m_plus @ u)
                if collecting and step in wanted:
                    stash[step] = u.copy()
        else:
            u = values.copy()
        if not collecting:
            return u
        out = {}
        for step in (snapshot_steps or ()):
            out[step] = stash[step]
        for tq, (k0, k1, theta) in frac.items():
            out[tq] = stash[k0] if k0 == k1 else (1 - theta) * stash[k0] + theta * stash[k1]
        return out

    def evolve_batch(self, values, durations, dt, adjoint=False):
        """Evolve each column of values by its own duration with shared steps.

        All columns share the startup and the per-step factorization; a
        column leaves the block once its duration is bracketed, and its
        result blends the two bracketing steps linearly in time.
        """
        values = np.asarray(values, dtype=float)
        if values.ndim != 2:
            raise ValueError("evolve_batch expects an (n, m) block")
        durations = np.asarray(durations, dtype=float)
        k_lo = np.floor(durations / dt + 1e-12).astype(int)
        theta = durations / dt - k_lo
        theta[theta < 1e-9] = 0.0
        k_hi = np.where(theta > 0, k_lo + 1, k_lo)

        out = values.copy()
        max_steps = int(k_hi.max(initial=0))
        if max_steps == 0:
            return out
        solver, m_plus = self._cn(dt, adjoint)
        active = np.flatnonzero(k_hi > 0)
        u = values[:, active].copy()
        lo_vals = {}
        for j in np.flatnonzero((k_lo == 0) & (theta > 0)):
            lo_vals[j] = values[:, j].copy()
        for step in range(1, max_steps + 1):
            if step == 1:
                u = solver.solve(solver.solve(u))
            else:
                u = solver.solve(m_plus @ u)
            hit_lo = np.flatnonzero((k_lo[active] == step) & (theta[active] > 0))
            for pos in hit_lo:
                lo_vals[int(active[pos])] = u[:, pos].copy()
            done = k_hi[active] == step
            if np.any(done):
                for pos in np.flatnonzero(done):
                    col = int(active[pos])
                    if theta[col] > 0:
                        out[:, col] = (1 - theta[col]) * lo_vals.pop(col) + theta[col] * u[:, pos]
                    else:
                        out[:, col] = u[:, pos]
                keep = ~done
                active, u = active[keep], u[:, keep]
            if active.size == 0:
                break
        return out

    def semigroup(self, f, t, dt=None):
        """T_t f for a DiscreteField, with the boundary-leak monitor."""
        out = self.evolve_values(f.values, t, dt=dt)
        self._monitor_leak(f, out)
        return DiscreteField(self.grid, out)

    def _monitor_leak(self, f, out_values):
        ref = np.max(np.abs(f.values))
        if ref == 0:
            return 0.0
        layer = np.max(np.abs(out_values[self.grid.boundary_layer_mask]))
        ratio = float(layer / ref)
        if ratio > LEAK_THRESHOLD:
            self.leak_events.append(ratio)
        return ratio

    # -- adjoint evaluation ----------------------------------------------------

    def adjoint_seed(self, x0):
        """Dense vector w with w.g = (cubic interpolation of g at x0)."""
        idx, wts = self.grid.interpolation_weights(
            np.atleast_2d(np.asarray(x0, float)), order=4
        )
        seed = np.zeros(self.grid.n_total)
        np.add.at(seed, idx[0], wts[0])
        return seed

    def adjoint_ladder(self, x0, t_max, dt, times=None):
        """Adjoint snapshots w(t) with w(t).g = (T_t g)(x0) for the CN scheme.

        The transposed step chain is walked once; each requested time costs
        two extra implicit-Euler half solves (the transposed startup).
        """
        if times is None:
            times = ladder_times(t_max, dt)
        steps = sorted({_steps_for(t, dt) for t in times})
        seed = self.adjoint_seed(x0)
        solver, m_plus = self._cn(dt, adjoint=True)
        snaps = {}
        if steps and steps[0] == 0:
            snaps[0] = seed.copy()
            steps = steps[1:]
        v = seed.copy()
        last = 0
        for k in steps:
            for _ in range(k - 1 - last):
                v = solver.solve(m_plus @ v)
            last = k - 1
            snaps[k] = solver.solve(solver.solve(v))
        return AdjointLadder(self.grid, dt, snaps)


def ladder_times(t_max, dt, ratio=LADDER_RATIO, t_min_frac=1.0 / 256.0):
    """Geometric time ladder from t_max/256 to t_max, snapped to the dt grid."""
    times = [0.0]
    t = max(t_max * t_min_frac, dt)
    while t < t_max:
        times.append(t)
        t *= ratio
    times.append(t_max)
    steps = sorted({_steps_for(t, dt) for t in times})
    return [s * dt for s in steps]


def _sqrt_time_weights(times, t, order=4):
    """Lagrange interpolation weights in sqrt(t) on a snapshot ladder.

    Returns (indices, weights); 4-point stencils keep the interpolation
    error far below the grid error, degrading gracefully near the ends.
    """
    roots = np.sqrt(np.asarray(times))
    s = np.sqrt(max(float(t), 0.0))
    if s <= roots[0]:
        return np.array([0]), np.array([1.0])
    if s >= roots[-1]:
        return np.array([len(roots) - 1]), np.array([1.0])
    j = int(np.searchsorted(roots, s)) - 1
    lo = max(0, min(j - (order // 2 - 1), len(roots) - order))
    idx = np.arange(lo, min(lo + order, len(roots)))
    w = np.ones(len(idx))
    for a in range(len(idx)):
        for b in range(len(idx)):
            if a != b:
                w[a] *= (s - roots[idx[b]]) / (roots[idx[a]] - roots[idx[b]])
    return idx, w


class AdjointLadder:
    """Point-evaluation functionals w(t) on a time ladder.

    ``value(t, g)`` approximates (T_t g)(x0) by interpolating the stored
    functionals in sqrt(t), the natural variable for the semigroup's
    short-time scaling.
    """

    def __init__(self, grid, dt, snaps):
        self.grid = grid
        self.dt = dt
        self._steps = np.array(sorted(snaps), dtype=int)
        self.times = self._steps * dt
        self._w = np.stack([snaps[s] for s in self._steps], axis=0)

    def weight(self, t):
        """Interpolated functional at time t, shape (n_total,)."""
        idx, w = _sqrt_time_weights(self.times, t)
        return np.tensordot(w, self._w[idx], axes=(0, 0))

    def value(self, t, g_values):
        """(T_t g)(x0) for flat values or an (n, m) block."""
        return self.weight(t) @ np.asarray(g_values)


class SemigroupCache:
    """Snapshots of T_t f and grad T_t f on a geometric ladder.

    Snapshots interpolate in sqrt(t); the ladder ratio 2^(1/4) keeps the
    interpolation error subordinate to the grid error.
    """

    def __init__(self, evolver, f, t_max, dt=None, times=None):
        self.grid = evolver.grid
        self.t_max = t_max
        if dt is None:
            dt = t_max / 256.0
        self.dt = dt
        if times is None:
            times = ladder_times(t_max, dt)
        steps = sorted({_steps_for(t, dt) for t in times})
        snaps = evolver.evolve_values(f.values, steps[-1] * dt, dt=dt,
                                      snapshot_steps=set(steps))
        evolver._monitor_leak(f, snaps[steps[-1]])
        self.times = np.array([s * dt for s in steps])
        self.values = np.stack([snaps[s] for s in steps], axis=0)
        self.gradients = np.stack([self.grid.gradient(snaps[s]) for s in steps], axis=0)

    def value_at(self, t):
        idx, w = _sqrt_time_weights(self.times, t)
        return np.tensordot(w, self.values[idx], axes=(0, 0))

    def gradient_at(self, t):
        idx, w = _sqrt_time_weights(self.times, t)
        return np.tensordot(w, self.gradients[idx], axes=(0, 0))


# -- module-level operation wrappers ----------------------------------------


def evolve_semigroup(evolver, f, t, dt=None):
    """u(t, .) ~ T_t f by Crank-Nicolson with Rannacher startup."""
    return evolver.semigroup(f, t, dt=dt)


def q_operator(evolver, k, t, f, cache=None, dt=None):
    """Q_t^k f = sigma^{ik} D_i T_t f as a grid field.

    Noise index k is 0-based. With t = 0 the gradient of f is used
    directly; a :class:`SemigroupCache` built on f short-circuits the
    evolution.
    """
    ctx = evolver.ctx
    if not (0 <= k < ctx.field.d1):
        raise ValueError(f"noise index k={k} outside 0..{ctx.field.d1 - 1}")
    if cache is not None:
        grad = cache.gradient_at(t)
    elif t == 0:
        grad = evolver.grid.gradient(f.values)
    else:
        evolved = evolver.evolve_values(f.values, t, dt=dt)
        evolver._monitor_leak(f, evolved)
        grad = evolver.grid.gradient(evolved)
    sig = ctx.sigma_at_points[:, :, k]
    return DiscreteField(evolver.grid, np.sum(sig * grad, axis=1))
