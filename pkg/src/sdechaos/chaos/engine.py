"""Batched evaluation of iterated-operator words anchored at a probe point.

A word of order m maps ordered times to
T_{final} Q^{k_m}_{s_m} ... Q^{k_1}_{s_1} f(x0). Stage one (the innermost
channel) reads interpolated snapshots from a semigroup cache; later stages
evolve blocks of fields with shared, duration-retired time stepping; the
outer T_{final}(.)(x0) evaluation contracts against precomputed adjoint
functionals. Three reductions share the machinery:

* ``kernel``    -- raw word values per multi-index,
* ``identity``  -- sum over multi-indices of squared point values
                   (the chaos-level integrand of the norm identity),
* ``criterion`` -- T_{final} applied to the summed squared fields at x0
                   (the integrand of the measurability criterion remainder).
"""

from __future__ import annotations

from itertools import product

import numpy as np

from ..pde.semigroup import SemigroupCache

__all__ = ["ChaosEngine", "enumerate_multi_indices"]


def enumerate_multi_indices(d1, m):
    return [tuple(t) for t in product(range(d1), repeat=m)]


class ChaosEngine:
    """Word evaluator bound to (operator context, base function f, anchor x0).

    Parameters
    ----------
    evolver : SemigroupEvolver
    f : DiscreteField
        Base function; must be supported well inside the box.
    x0 : array-like
        Anchor point, strictly inside the inner half-box.
    t_cap : float
        Largest single duration any stage will request.
    dt : float, optional
        Step for the inner stage evolutions (default t_cap / 128).
    fine_dt : float, optional
        Step for the snapshot cache and adjoint ladder (default t_cap / 256).
    multi_cap : int
        Largest number of enumerated multi-index columns per node; beyond
        it multi-indices are Monte Carlo sampled with replicate error bars.
    """

    def __init__(self, evolver, f, x0, t_cap, dt=None, fine_dt=None,
                 multi_cap=4096, multi_samples=64, seed=0, column_budget=None):
        self.evolver = evolver
        self.ctx = evolver.ctx
        self.grid = evolver.grid
        self.f = f
        self.x0 = np.asarray(x0, dtype=float)
        half = 0.5 * self.grid.R_dom
        if np.any(np.abs(self.x0) > half):
            raise ValueError(f"anchor {self.x0} outside the inner half-box (|x| <= {half})")
        self.t_cap = float(t_cap)
        self.dt = dt if dt is not None else self.t_cap / 128.0
        fine = fine_dt if fine_dt is not None else self.t_cap / 256.0
        self.cache = SemigroupCache(evolver, f, self.t_cap, dt=fine)
        self.ladder = evolver.adjoint_ladder(self.x0, self.t_cap, fine)
        self.multi_cap = multi_cap
        self.multi_samples = multi_samples
        self.seed = seed
        if column_budget is None:
            column_budget = 64 if self.grid.n_total > 50_000 else 256
        self.column_budget = column_budget
        # identically-zero noise columns contribute nothing to any word
        norms = np.max(np.abs(self.ctx.sigma_at_points), axis=(0, 1))
        self.active_ks = [k for k in range(self.ctx.field.d1) if norms[k] > 0.0]

    # -- helpers --------------------------------------------------------------

    def _contract(self, grads, ks):
        """sigma^{k}.grad for a block: grads (n, d, m), ks per column."""
        sig = self.ctx.sigma_at_points  # (n, d, d1)
        out = np.empty((grads.shape[0], grads.shape[2]))
        for j, k in enumerate(ks):
            out[:, j] = np.sum(sig[:, :, k] * grads[:, :, j], axis=1)
        return out

    def _stage_one(self, durations, firsts):
        """Columns sigma^{k}.grad T_{dur} f for (node, k) pairs.

        durations: (c,) stage-one durations; firsts: list of first indices.
        Returns (n_total, c * len(firsts)) with node-major column order.
        """
        sig = self.ctx.sigma_at_points
        cols = np.empty((self.grid.n_total, len(durations) * len(firsts)))
        for i, s in enumerate(durations):
            grad = self.cache.gradient_at(s)  # (n, d)
            for j, k in enumerate(firsts):
                cols[:, i * len(firsts) + j] = np.sum(sig[:, :, k] * grad, axis=1)
        return cols

    def _word_block(self, durations, multis):
        """Evolve a chunk of nodes through all stages for the given multis.

        durations: (c, m). Returns (n_total, c * n_multi) columns ordered
        node-major, multi-minor, where multis must share length m.
        """
        c, m = durations.shape
        n_multi = len(multis)
        firsts = sorted({mi[0] for mi in multis})
        first_pos = {k: j for j, k in enumerate(firsts)}
        cols = self._stage_one(durations[:, 0], firsts)
        # prefixes per node: tuples of noise indices accumulated so far
        prefixes = [(k,) for k in firsts]
        for stage in range(1, m):
            needed = sorted({mi[: stage + 1] for mi in multis if mi[:stage] in set(prefixes)})
            # evolve every current column by its node's stage duration
            n_pref = len(prefixes)
            reps = np.repeat(durations[:, stage], n_pref)
            evolved = self.evolver.evolve_batch(cols, reps, self.dt)
            grads = self.grid.gradient(evolved)  # (n, d, c * n_pref)
            new_cols = np.empty((self.grid.n_total, c * len(needed)))
            pref_pos = {p: j for j, p in enumerate(prefixes)}
            sig = self.ctx.sigma_at_points
            for j, ext in enumerate(needed):
                src = pref_pos[ext[:stage]]
                g = grads[:, :, src::n_pref]  # (n, d, c): column j of every node
                new_cols[:, j::len(needed)] = np.einsum("ndc,nd->nc", g, sig[:, :, ext[stage]])
            cols = new_cols
            prefixes = needed
        # map requested multis onto the final column layout
        pref_pos = {p: j for j, p in enumerate(prefixes)}
        order = [pref_pos[mi] for mi in multis]
        idx = np.concatenate(
            [i * len(prefixes) + np.asarray(order) for i in range(c)]
        )
        return cols[:, idx], c, n_multi

    def _reduce(self, cols, c, n_multi, final_times, mode, scale=1.0):
        if mode == "criterion":
            out = np.empty(c)
            for i in range(c):
                block = cols[:, i * n_multi:(i + 1) * n_multi]
                squared = np.sum(block * block, axis=1) * scale
                out[i] = self.ladder.value(final_times[i], squared)
            return out
        vals = np.empty((c, n_multi))
        for i in range(c):
            block = cols[:, i * n_multi:(i + 1) * n_multi]
            vals[i] = self.ladder.weight(final_times[i]) @ block
        if mode == "kernel":
            return vals
        if mode == "identity":
            return np.sum(vals * vals, axis=1) * scale
        raise ValueError(f"unknown mode {mode!r}")

    # -- public evaluation ------------------------------------------------------

    def evaluate(self, durations, final_times, m, mode, multis=None):
        """Evaluate the order-m reduction at a set of nodes.

        Parameters
        ----------
        durations : (N, m) array
            Stage durations in application order (innermost first).
        final_times : (N,) array
            Time of the outer semigroup factor.
        multis : list of tuples, optional
            Explicit multi-indices; default enumerates all d1^m (or samples
            them beyond ``multi_cap``).

        Returns
        -------
        (N,) array for identity/criterion modes, (N, n_multi) for kernels.
        """
        durations = np.atleast_2d(np.asarray(durations, dtype=float))
        final_times = np.asarray(final_times, dtype=float)
        if durations.shape[1] != m:
            raise ValueError(f"durations must have {m} stage columns")
        if np.any(durations < -1e-12) or np.any(final_times < -1e-12):
            raise ValueError("ordered-time tuple violates the simplex ordering")
        active = self.active_ks
        scale = 1.0
        if multis is None:
            if len(active) ** m <= self.multi_cap:
                multis = [tuple(t) for t in product(active, repeat=m)]
            else:
                rng = np.random.default_rng(self.seed)
                draws = rng.integers(0, len(active), size=(self.multi_samples, m))
                multis = [tuple(active[v] for v in row) for row in draws]
                scale = len(active) ** m / len(multis)
                if mode == "kernel":
                    raise ValueError("kernel mode needs explicit multi-indices")
        n_multi = len(multis)
        chunk = max(1, self.column_budget // max(n_multi, 1))
        outs = []
        for start in range(0, durations.shape[0], chunk):
            sl = slice(start, min(start + chunk, durations.shape[0]))
            if m == 0:
                c = durations[sl].shape[0]
                red = np.array([
                    self.ladder.value(t, self.f.values) for t in final_times[sl]
                ])
                outs.append(red)
                continue
            cols, c, nm = self._word_block(durations[sl], multis)
            outs.append(self._reduce(cols, c, nm, final_times[sl], mode, scale))
        return np.concatenate(outs, axis=0)

    def word_values(self, durations, final_times, multis):
        """Raw word values per multi-index, shape (N, n_multi)."""
        m = len(multis[0])
        return self.evaluate(durations, final_times, m, "kernel", multis=multis)

    # -- ordered-grid integration with shared evolution prefixes ---------------

    def ordered_sweep(self, t, m, mode, order=8):
        """Integral over ordered times t > t_1 > ... > t_m of the reduction.

        Uses ratio coordinates t_j = r_j t_{j-1} with tensor Gauss-Legendre
        nodes, so all nodes sharing a time prefix reuse one snapshot-
        collecting evolution pass; identity mode integrates the summed
        squared point values, criterion mode the outer-smoothed squared
        fields. ``order`` may be one int or a per-level tuple (deeper
        levels are the expensive ones).
        """
        from numpy.polynomial.legendre import leggauss

        active = self.active_ks
        if len(active) ** m > self.multi_cap:
            raise ValueError("ordered_sweep enumerates all multi-indices; "
                             "use evaluate() with sampled multi-indices instead")
        orders = (order,) * m if np.isscalar(order) else tuple(order)
        if len(orders) != m:
            raise ValueError(f"need {m} per-level orders, got {orders}")
        rules = []
        for q in orders:
            x1, w1 = leggauss(q)
            rules.append((0.5 * (x1 + 1.0), 0.5 * w1))
        sig = self.ctx.sigma_at_points
        grid = self.grid
        total = 0.0

        def finalize(cols, t_final):
            if mode == "identity":
                vals = self.ladder.weight(t_final) @ cols
                return float(np.sum(vals * vals))
            if mode == "criterion":
                return float(self.ladder.value(t_final, np.sum(cols * cols, axis=1)))
            raise ValueError(f"unknown mode {mode!r}")

        def sweep(cols, t_prev, level, weight):
            """cols: fields after level-1 stages; integrate levels level..m."""
            out = 0.0
            r_nodes, r_weights = rules[level - 1]
            t_next = r_nodes * t_prev
            spans = [float(t_prev - tn) for tn in t_next]
            snaps = self.evolver.evolve_values(
                cols, max(spans), dt=self.dt, snapshot_times=set(spans)
            )
            for j, tn in enumerate(t_next):
                block = snaps[spans[j]]
                grads = grid.gradient(block)
                new_cols = np.empty((grid.n_total, block.shape[1] * len(active)))
                for kk, k in enumerate(active):
                    new_cols[:, kk::len(active)] = np.einsum(
                        "ndc,nd->nc", grads, sig[:, :, k]
                    )
                w = weight * r_weights[j] * t_prev  # Jacobian factor dt_level
                if level == m:
                    out += w * finalize(new_cols, tn)
                else:
                    out += sweep(new_cols, tn, level + 1, w)
            return out

        r_nodes, r_weights = rules[0]
        for i, r1 in enumerate(r_nodes):
            t1 = r1 * t
            grad1 = self.cache.gradient_at(t - t1)
            cols = np.stack(
                [np.sum(sig[:, :, k] * grad1, axis=1) for k in active], axis=1
            )
            w = r_weights[i] * t
            if m == 1:
                total += w * finalize(cols, t1)
            else:
                total += sweep(cols, t1, 2, w)
        return total
