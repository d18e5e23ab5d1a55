"""Admissibility diagnostics: ellipticity, mean oscillation, L_d norms.

All three are report-producing probes; none of them certifies membership in
a function class. L_d integrals are taken over a truncated ball B_R with
dyadic radial refinement toward declared singular points, and a failure of
the refinement to converge is reported, not raised.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gamma, pi

import numpy as np
from numpy.polynomial.legendre import leggauss

__all__ = ["EllipticityReport", "ellipticity_check", "oscillation_modulus", "LdNormReport", "ld_norm"]


@dataclass(frozen=True)
class EllipticityReport:
    passed: bool
    min_eig: float
    max_eig: float
    delta: float
    worst_point: tuple


def ellipticity_check(field, cloud, delta=None):
    """Two-sided eigenvalue bounds of a = sigma sigma^T over a point cloud.

    Passes iff every eigenvalue lies in [delta, 1/delta].
    """
    cloud = np.atleast_2d(np.asarray(cloud, dtype=float))
    if cloud.shape[0] == 0:
        raise ValueError("cloud must be non-empty")
    delta = field.delta if delta is None else float(delta)
    a = field.a(cloud)
    eigs = np.linalg.eigvalsh(a)
    mins = eigs[:, 0]
    maxs = eigs[:, -1]
    i_min = int(np.argmin(mins))
    i_max = int(np.argmax(maxs))
    lo, hi = float(mins[i_min]), float(maxs[i_max])
    tol = 1e-12
    passed = (lo >= delta - tol) and (hi <= 1.0 / delta + tol)
    worst = cloud[i_min] if delta - lo >= hi - 1.0 / delta else cloud[i_max]
    return EllipticityReport(passed, lo, hi, delta, tuple(float(v) for v in worst))


def _uniform_ball(rng, n, d, radius):
    z = rng.standard_normal((n, d))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    u = rng.random(n) ** (1.0 / d)
    return radius * u[:, None] * z


def oscillation_modulus(field, r, centers, rho_fractions=(1.0, 0.5, 0.25), n_pairs=512, seed=0):
    """Monte Carlo estimate of the double mean oscillation of a over balls.

    Returns the sup over centers and sampled radii rho <= r of
    mean_{y,z in B_rho(x)} |a(y) - a(z)|. Diagnostic only; deterministic
    for a given seed.
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    rng = np.random.default_rng(seed)
    worst = 0.0
    for c in centers:
        for frac in rho_fractions:
            rho = r * frac
            y = c + _uniform_ball(rng, n_pairs, field.d, rho)
            z = c + _uniform_ball(rng, n_pairs, field.d, rho)
            diff = field.a(y) - field.a(z)
            osc = float(np.mean(np.sqrt(np.sum(diff * diff, axis=(1, 2)))))
            worst = max(worst, osc)
    return worst


# -- L_d norms ---------------------------------------------------------------


@dataclass(frozen=True)
class LdNormReport:
    """Result of a truncated L_d norm computation.

    ``converged`` is False when dyadic refinement toward the singular point
    detects a non-integrable (or numerically unresolvable) singularity; the
    value then reports the partial integral.
    """

    value: float
    converged: bool
    lam: float
    radius: float
    n_shells: int
    tail_estimate: float


def _component_magnitude(field, component, k):
    if component == "drift":
        return lambda x: np.linalg.norm(field.drift_fn(x), axis=1)
    if component == "sigma_x":
        if k is None:
            return lambda x: np.sum(field.sigma_jacobian_norms(x), axis=1)
        return lambda x: field.sigma_jacobian_norms(x)[:, k]
    raise ValueError(f"unknown component {component!r}")


def _angular_rule(d, n_ang, seed=0):
    """Unit directions and weights integrating over the unit sphere."""
    if d == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if d == 2:
        phi = 2.0 * np.pi * np.arange(n_ang) / n_ang
        dirs = np.stack([np.cos(phi), np.sin(phi)], axis=1)
        return dirs, np.full(n_ang, 2.0 * np.pi / n_ang)
    if d == 3:
        nu = max(4, n_ang // 4)
        u, wu = leggauss(nu)
        phi = 2.0 * np.pi * np.arange(n_ang) / n_ang
        su = np.sqrt(1.0 - u**2)
        dirs = np.concatenate(
            [
                np.stack(
                    [np.outer(su, np.cos(phi)).ravel(), np.outer(su, np.sin(phi)).ravel(),
                     np.repeat(u, n_ang)], axis=1
                )
            ]
        )
        w = np.outer(wu, np.full(n_ang, 2.0 * np.pi / n_ang)).ravel()
        return dirs, w
    # Fallback for d > 3: seeded Monte Carlo directions.
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n_ang * n_ang, d))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    area = 2.0 * pi ** (d / 2.0) / gamma(d / 2.0)
    return z, np.full(z.shape[0], area / z.shape[0])


def _shell_integral(mag, center, r_lo, r_hi, d, lam, n_rad, n_ang):
    """Integral of mag^d 1_{mag > lam} over the annulus r_lo < |x-c| < r_hi."""
    xr, wr = leggauss(n_rad)
    radii = 0.5 * (r_hi + r_lo) + 0.5 * (r_hi - r_lo) * xr
    wr = wr * 0.5 * (r_hi - r_lo)
    dirs, wa = _angular_rule(d, n_ang)
    pts = center[None, None, :] + radii[:, None, None] * dirs[None, :, :]
    vals = mag(pts.reshape(-1, d)).reshape(len(radii), len(wa))
    vals = np.where(vals > lam, vals, 0.0)
    integrand = vals**d
    return float(np.einsum("r,a,ra->", wr * radii ** (d - 1), wa, integrand))


def ld_norm(field, component="drift", lam=0.0, R=4.0, k=None,
            rel_tol=1e-4, max_shells=64, n_rad=8, n_ang=32):
    """Numerical L_d norm of a coefficient component over B_R.

    Computes || g 1_{|g| > lam} ||_{L_d(B_R)} where g is the drift or a
    column Jacobian of sigma (``component="sigma_x"`` with ``k`` a column
    index, or ``k=None`` for the sum over columns).

    Dyadic annuli shrink toward the first declared singular point; each
    shell uses a product Gauss-Legendre x angular rule, recomputed at
    doubled orders until two refinement levels agree to ``rel_tol``
    relative. Shell sums with a non-summable trend mark the result as
    non-converged.
    """
    mag = _component_magnitude(field, component, k)
    center = np.asarray(field.singular_points[0], dtype=float) if field.singular_points \
        else np.zeros(field.d)
    d = field.d

    def run(nr, na):
        shells = []
        r_hi = R
        for _ in range(max_shells):
            r_lo = r_hi / 2.0
            shells.append(_shell_integral(mag, center, r_lo, r_hi, d, lam, nr, na))
            r_hi = r_lo
            total = sum(shells)
            if total > 0 and shells[-1] < 1e-15 * total and len(shells) > 4:
                break
        return np.array(shells)

    shells = run(n_rad, n_ang)
    shells_fine = run(2 * n_rad, 2 * n_ang)
    partial = float(np.sum(shells_fine))

    # Tail behaviour from the last shells: geometric decay, power law or flat.
    tail = 0.0
    converged = True
    active = shells_fine[shells_fine > 0]
    if partial > 0 and len(shells_fine) >= max_shells and len(active) >= 8:
        last = active[-8:]
        ratios = last[1:] / last[:-1]
        rho = float(np.mean(ratios))
        if rho >= 0.995:
            converged = False  # flat contributions: logarithmic divergence
        elif rho <= 0.6:
            tail = last[-1] * rho / (1.0 - rho)
        else:
            # power-law fit c_j ~ A j^-p against the shell index
            j = np.arange(len(active) - 8, len(active)) + 1.0
            p = -np.polyfit(np.log(j), np.log(last), 1)[0]
            if p <= 1.05:
                converged = False
            else:
                tail = last[-1] * (j[-1] / (p - 1.0))

    coarse, fine = float(np.sum(shells)), partial
    if fine > 0 and abs(fine - coarse) > rel_tol * fine:
        converged = False

    value = (partial + tail) ** (1.0 / d) if partial + tail > 0 else 0.0
    return LdNormReport(value, converged, float(lam), float(R), len(shells_fine),
                        float(tail ** (1.0 / d) if tail > 0 else 0.0))
