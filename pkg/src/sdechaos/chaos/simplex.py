"""Quadrature over the open simplex {s_k > 0, s_1 + ... + s_n < t0}.

Integration happens on the unit cube after the ordered-times substitution
t_k = t_{k-1} u_k (a Duffy-type map), which regularizes the integrable
endpoint singularities the iterated-kernel bounds produce. Dimensions one
and two use tensor Gauss-Legendre; higher dimensions use scrambled Sobol
points with a replicate-based error estimate.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.stats import qmc

__all__ = ["IntegrationResult", "simplex_integrate", "cube_to_simplex", "ordered_gl_rule"]


@dataclass(frozen=True)
class IntegrationResult:
    value: float
    error: float
    n_evals: int
    converged: bool
    method: str


def cube_to_simplex(u, t0):
    """Map cube points u in [0,1]^n to simplex coordinates s.

    Returns (s, jacobian): the chain t_k = t_{k-1} u_k produces ordered
    times whose consecutive gaps are the simplex coordinates
    s_k = t_k - t_{k+1} (s_n = t_n); the volume element is prod_k t_{k-1}.
    """
    u = np.atleast_2d(np.asarray(u, dtype=float))
    n = u.shape[1]
    t_prev = np.full(u.shape[0], float(t0))
    jac = np.ones(u.shape[0])
    times = np.empty_like(u)
    for k in range(n):
        jac *= t_prev
        times[:, k] = t_prev * u[:, k]
        t_prev = times[:, k]
    s = np.empty_like(times)
    s[:, :-1] = times[:, :-1] - times[:, 1:]
    s[:, -1] = times[:, -1]
    return s, jac


def _cube_gl(n, order):
    x1, w1 = leggauss(order)
    u1 = 0.5 * (x1 + 1.0)
    w1 = 0.5 * w1
    grids = np.meshgrid(*([u1] * n), indexing="ij")
    u = np.stack([g.ravel() for g in grids], axis=-1)
    w = np.ones(u.shape[0])
    for g in np.meshgrid(*([w1] * n), indexing="ij"):
        w = w * g.ravel()
    return u, w


def ordered_gl_rule(t0, n, order):
    """Ordered-time Gauss rule: simplex coordinates s (N, n) and weights."""
    u, w = _cube_gl(n, order)
    s, jac = cube_to_simplex(u, t0)
    return s, w * jac


def _gl_integrate(g, n, t0, budget):
    order = max(2, min(int(budget ** (1.0 / n)), 48))
    s, w = ordered_gl_rule(t0, n, order)
    value = float(w @ np.asarray(g(s), dtype=float))
    low = max(2, (2 * order) // 3)
    s2, w2 = ordered_gl_rule(t0, n, low)
    value_low = float(w2 @ np.asarray(g(s2), dtype=float))
    return value, abs(value - value_low), len(w) + len(w2)


def _qmc_integrate(g, n, t0, budget, seed, replicates=3):
    per = max(64, budget // replicates)
    m = int(np.floor(np.log2(per)))
    seeds = np.random.SeedSequence(seed).spawn(replicates)
    vals = []
    n_evals = 0
    for ss in seeds:
        sob = qmc.Sobol(d=n, scramble=True, seed=np.random.default_rng(ss))
        u = sob.random(2**m)
        s, jac = cube_to_simplex(u, t0)
        vals.append(float(np.mean(jac * np.asarray(g(s), dtype=float))))
        n_evals += 2**m
    value = float(np.mean(vals))
    err = float(np.std(vals, ddof=1) / np.sqrt(replicates))
    return value, err, n_evals


def simplex_integrate(g, n, t0, method=None, budget=20_000, seed=0, tol=None):
    """Integrate g over the open simplex S_n(t0).

    Parameters
    ----------
    g : callable
        Vectorized over an (N, n) array of simplex coordinates.
    method : str, optional
        ``"tensor-gl"`` or ``"quasi-mc"``; default picks tensor
        Gauss-Legendre for n <= 2 and scrambled Sobol for n >= 3.
    budget : int
        Maximum number of g evaluations (>= 100).
    tol : float, optional
        Requested relative tolerance; when the budget is exhausted with a
        larger error estimate the result is flagged non-converged.
    """
    if n < 1:
        raise ValueError("simplex dimension n must be >= 1")
    if budget < 100:
        raise ValueError("budget must allow at least 100 evaluations")
    if method is None:
        method = "tensor-gl" if n <= 2 else "quasi-mc"
    if method == "tensor-gl":
        value, err, n_evals = _gl_integrate(g, n, t0, budget)
    elif method == "quasi-mc":
        value, err, n_evals = _qmc_integrate(g, n, t0, budget, seed)
    else:
        raise ValueError(f"unknown method {method!r}")
    converged = tol is None or err <= tol * max(abs(value), 1e-300)
    return IntegrationResult(value, err, n_evals, converged, method)


def simplex_volume(n, t0):
    return t0**n / factorial(n)
