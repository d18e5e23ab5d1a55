"""Coefficient fields (sigma, b) for the diffusion dx = sigma^k dw^k + b dt.

A field packages vectorized evaluators for the d x d1 diffusion matrix
``sigma`` (columns sigma^k drive independent noise components) and the
drift ``b``, together with ellipticity metadata and smoothness class.
Fields are immutable after construction; every operation is a pure
function of its inputs, so instances are safe to share across threads.

Noise columns are indexed 0..d1-1 throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .bumps import Mollifier, cutoff_bump, cutoff_bump_gradient

__all__ = [
    "CoefficientField",
    "FieldError",
    "BUILTIN_IDS",
    "builtin_field",
    "mollify",
    "directional_derivative",
]

BUILTIN_IDS = (
    "constant-identity",
    "loglog-oscillating-diffusion",
    "log-singular-drift",
    "vortex-2d",
    "block-vortex-3d",
    "user-defined",
)

# Guard radius below which singular formulas switch to their defined value.
SINGULAR_GUARD = 1e-12


class FieldError(ValueError):
    """Invalid field construction or an operation applied outside its domain."""


def _as_batch(x, d):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        if x.shape[0] != d:
            raise FieldError(f"point has dimension {x.shape[0]}, field has d={d}")
        return x[None, :], True
    if x.ndim != 2 or x.shape[1] != d:
        raise FieldError(f"expected (N, {d}) batch, got shape {x.shape}")
    return x, False


@dataclass(frozen=True)
class CoefficientField:
    """The coefficient pair (sigma, b) with ellipticity metadata.

    Attributes
    ----------
    d, d1 : int
        Space and noise dimensions, d1 >= d.
    smoothness : str
        One of ``analytic-smooth``, ``mollified``, ``raw-singular``.
    mollification_level : int or None
        Level n when smoothness is ``mollified``.
    delta : float
        Declared two-sided ellipticity constant in (0., 1.):
        delta |v|^2 <= v.a(x).v <= |v|^2 / delta.
    norm_b, norm_sigma_x : float or None
        Declared L_d bounds for |b| and the column Jacobians; None marks
        "no finite bound declared" (the counterexample fields).
    singular_points : tuple
        Points where the raw formulas are singular; quadrature refines there.
    """

    field_id: str
    d: int
    d1: int
    sigma_fn: Callable
    drift_fn: Callable
    smoothness: str = "analytic-smooth"
    mollification_level: Optional[int] = None
    delta: float = 0.9
    norm_b: Optional[float] = None
    norm_sigma_x: Optional[float] = None
    singular_points: tuple = ()
    params: dict = field(default_factory=dict)
    sigma_jac_norm_fn: Optional[Callable] = None

    def __post_init__(self):
        if self.d < 1:
            raise FieldError("d must be >= 1")
        if self.d1 < self.d:
            raise FieldError("d1 must be >= d")
        if not (0.0 < self.delta < 1.0):
            raise FieldError("delta must lie in (0, 1)")
        if self.smoothness not in ("analytic-smooth", "mollified", "raw-singular"):
            raise FieldError(f"unknown smoothness {self.smoothness!r}")
        if self.smoothness == "mollified" and not self.mollification_level:
            raise FieldError("mollified fields need a mollification level")

    # -- evaluation ---------------------------------------------------------

    def sigma(self, x):
        """Diffusion matrix, shape (d, d1) for a point or (N, d, d1) for a batch."""
        xb, single = _as_batch(x, self.d)
        out = self.sigma_fn(xb)
        return out[0] if single else out

    def drift(self, x):
        """Drift vector, shape (d,) or (N, d)."""
        xb, single = _as_batch(x, self.d)
        out = self.drift_fn(xb)
        return out[0] if single else out

    def a(self, x):
        """Diffusion tensor a = sigma sigma^T, shape (d, d) or (N, d, d)."""
        xb, single = _as_batch(x, self.d)
        s = self.sigma_fn(xb)
        out = np.einsum("nik,njk->nij", s, s)
        return out[0] if single else out

    # -- derivatives --------------------------------------------------------

    @property
    def derivative_step(self):
        """Finite-difference step tied to the mollification scale."""
        if self.smoothness == "mollified":
            return 0.1 / self.mollification_level
        return 1e-4

    def _require_differentiable(self):
        if self.smoothness == "raw-singular":
            raise FieldError(
                f"field {self.field_id!r} is raw-singular; derivatives are "
                "undefined at its singular points (mollify first)"
            )

    def sigma_directional(self, x, l):
        """Directional derivative l^i D_i sigma, shape (N, d, d1).

        Central differences with step :attr:`derivative_step`; the step is
        taken along the unit direction and rescaled so parallel directions
        compose exactly linearly.
        """
        self._require_differentiable()
        xb, single = _as_batch(x, self.d)
        lb, _ = _as_batch(l, self.d)
        if lb.shape[0] == 1 and xb.shape[0] > 1:
            lb = np.broadcast_to(lb, xb.shape)
        norms = np.linalg.norm(lb, axis=1)
        safe = np.where(norms > 0, norms, 1.0)
        unit = lb / safe[:, None]
        h = self.derivative_step
        out = (self.sigma_fn(xb + h * unit) - self.sigma_fn(xb - h * unit)) / (2 * h)
        out = out * norms[:, None, None]
        return out[0] if single else out

    def drift_directional(self, x, l):
        """Directional derivative l^i D_i b, shape (N, d)."""
        self._require_differentiable()
        xb, single = _as_batch(x, self.d)
        lb, _ = _as_batch(l, self.d)
        if lb.shape[0] == 1 and xb.shape[0] > 1:
            lb = np.broadcast_to(lb, xb.shape)
        norms = np.linalg.norm(lb, axis=1)
        safe = np.where(norms > 0, norms, 1.0)
        unit = lb / safe[:, None]
        h = self.derivative_step
        out = (self.drift_fn(xb + h * unit) - self.drift_fn(xb - h * unit)) / (2 * h)
        out = out * norms[:, None]
        return out[0] if single else out

    def sigma_jacobian_norms(self, x):
        """Frobenius norm of each column Jacobian |sigma_x^k|, shape (N, d1).

        Uses the analytic Jacobian when the built-in provides one, else a
        finite difference with a step scaled to the distance from the
        nearest declared singular point. Used by the L_d diagnostics, which
        unlike :meth:`sigma_directional` must probe raw-singular fields.
        """
        xb, single = _as_batch(x, self.d)
        if self.sigma_jac_norm_fn is not None:
            out = self.sigma_jac_norm_fn(xb)
        else:
            h = np.full(xb.shape[0], self.derivative_step)
            if self.singular_points:
                dist = np.min(
                    [np.linalg.norm(xb - np.asarray(p), axis=1) for p in self.singular_points],
                    axis=0,
                )
                h = np.minimum(h, np.maximum(0.05 * dist, 1e-9))
            sq = np.zeros((xb.shape[0], self.d1))
            for i in range(self.d):
                e = np.zeros(self.d)
                e[i] = 1.0
                diff = (
                    self.sigma_fn(xb + h[:, None] * e) - self.sigma_fn(xb - h[:, None] * e)
                ) / (2 * h[:, None, None])
                sq += np.sum(diff * diff, axis=1)
            out = np.sqrt(sq)
        return out[0] if single else out

    def label(self):
        if self.smoothness == "mollified":
            return f"{self.field_id}[mollified n={self.mollification_level}]"
        return self.field_id


# -- built-in fields --------------------------------------------------------


def _constant_identity(d, d1):
    base = np.zeros((d, d1))
    base[:, :d] = np.eye(d)

    def sigma(x):
        return np.broadcast_to(base, (x.shape[0], d, d1)).copy()

    def drift(x):
        return np.zeros((x.shape[0], d))

    def jac(x):
        return np.zeros((x.shape[0], d1))

    return sigma, drift, jac


def _loglog_coefficient(x, cutoff_radius):
    """2 + zeta(x) sin(ln |ln |x||), with value 2 at the origin."""
    r = np.linalg.norm(x, axis=1)
    c = np.full(x.shape[0], 2.0)
    # The formula is only evaluated strictly inside the cutoff support,
    # which keeps it away from the ln|x| = 0 circle.
    live = (r > SINGULAR_GUARD) & (r < cutoff_radius)
    zeta = cutoff_bump(x[live], radius=cutoff_radius)
    c[live] += zeta * np.sin(np.log(np.abs(np.log(r[live]))))
    return c


def _loglog_field(d, cutoff_radius):
    def sigma(x):
        c = _loglog_coefficient(x, cutoff_radius)
        out = np.zeros((x.shape[0], d, d))
        idx = np.arange(d)
        out[:, idx, idx] = c[:, None]
        return out

    def drift(x):
        return np.zeros((x.shape[0], d))

    def jac(x):
        # grad c = sin(g) grad zeta + zeta cos(g) x / (r^2 ln r), g = ln|ln r|
        r = np.linalg.norm(x, axis=1)
        out = np.zeros((x.shape[0], d))
        live = (r > SINGULAR_GUARD) & (r < cutoff_radius)
        xs, rs = x[live], r[live]
        g = np.log(np.abs(np.log(rs)))
        zeta = cutoff_bump(xs, radius=cutoff_radius)
        gz = cutoff_bump_gradient(xs, radius=cutoff_radius)
        grad = np.sin(g)[:, None] * gz
        grad += (zeta * np.cos(g) / (rs**2 * np.log(rs)))[:, None] * xs
        out[live] = grad
        # |sigma_x^k| = |grad c| for every diagonal column
        return np.repeat(np.linalg.norm(out, axis=1)[:, None], d, axis=1)

    return sigma, drift, jac


def _log_drift_field(d, cutoff_radius, direction):
    ell = np.asarray(direction, dtype=float)

    def sigma(x):
        return np.broadcast_to(np.eye(d), (x.shape[0], d, d)).copy()

    def drift(x):
        r = np.linalg.norm(x, axis=1)
        out = np.zeros((x.shape[0], d))
        live = (r > SINGULAR_GUARD) & (r < cutoff_radius)
        zeta = cutoff_bump(x[live], radius=cutoff_radius)
        amp = zeta / (r[live] * np.log(r[live]))
        out[live] = amp[:, None] * ell
        return out

    def jac(x):
        return np.zeros((x.shape[0], d))

    return sigma, drift, jac


def _vortex_2d():
    def sigma(x):
        r = np.linalg.norm(x, axis=1)
        out = np.empty((x.shape[0], 2, 2))
        nz = r > SINGULAR_GUARD
        out[~nz] = np.eye(2)
        xs = x[nz] / r[nz, None]
        out[nz, 0, 0] = xs[:, 0]
        out[nz, 1, 0] = xs[:, 1]
        out[nz, 0, 1] = -xs[:, 1]
        out[nz, 1, 1] = xs[:, 0]
        return out

    def drift(x):
        return np.zeros((x.shape[0], 2))

    def jac(x):
        r = np.maximum(np.linalg.norm(x, axis=1), SINGULAR_GUARD)
        return np.repeat((1.0 / r)[:, None], 2, axis=1)

    return sigma, drift, jac


def _block_vortex_3d():
    def sigma(x):
        r = np.linalg.norm(x, axis=1)
        out = np.zeros((x.shape[0], 3, 9))
        nz = r > SINGULAR_GUARD
        out[~nz, :, :3] = np.eye(3)
        xs = x[nz] / r[nz, None]
        for i in range(3):
            for j in range(3):
                out[nz, i, 3 * i + j] = xs[:, j]
        return out

    def drift(x):
        return np.zeros((x.shape[0], 3))

    def jac(x):
        r = np.maximum(np.linalg.norm(x, axis=1), SINGULAR_GUARD)
        x2 = x * x
        r2 = r * r
        out = np.empty((x.shape[0], 9))
        for i in range(3):
            for j in range(3):
                out[:, 3 * i + j] = np.sqrt(np.maximum(r2 - x2[:, j], 0.0)) / r2
        return out

    return sigma, drift, jac


def builtin_field(field_id, d=None, params=None):
    """Construct one of the built-in coefficient fields.

    Parameters
    ----------
    field_id : str
        One of :data:`BUILTIN_IDS` except ``user-defined`` (see
        :mod:`sdechaos.fields.expressions` for those).
    d : int, optional
        Spatial dimension where the field admits a choice.
    params : dict, optional
        ``cutoff_radius`` (default 0.5), ``d1`` for constant-identity
        padding, ``drift_direction`` for the singular-drift example.

    Raises
    ------
    FieldError
        For an unsupported (field_id, d) combination.
    """
    params = dict(params or {})
    cutoff_radius = float(params.get("cutoff_radius", 0.5))

    if field_id == "constant-identity":
        d = 2 if d is None else int(d)
        d1 = int(params.get("d1", d + 1))
        if d1 < d:
            raise FieldError("constant-identity requires d1 >= d")
        sig, dr, jac = _constant_identity(d, d1)
        return CoefficientField(
            field_id, d, d1, sig, dr, smoothness="analytic-smooth",
            delta=0.9, norm_b=0.0, norm_sigma_x=0.0, params=params,
            sigma_jac_norm_fn=jac,
        )

    if field_id == "loglog-oscillating-diffusion":
        d = 2 if d is None else int(d)
        sig, dr, jac = _loglog_field(d, cutoff_radius)
        return CoefficientField(
            field_id, d, d, sig, dr, smoothness="raw-singular",
            delta=1.0 / 9.0, norm_b=0.0, norm_sigma_x=None,
            singular_points=(tuple([0.0] * d),), params=params,
            sigma_jac_norm_fn=jac,
        )

    if field_id == "log-singular-drift":
        d = 3 if d is None else int(d)
        direction = np.asarray(params.get("drift_direction", np.eye(d)[0]), dtype=float)
        if direction.shape != (d,):
            raise FieldError("drift_direction must be a d-vector")
        sig, dr, jac = _log_drift_field(d, cutoff_radius, direction)
        return CoefficientField(
            field_id, d, d, sig, dr, smoothness="raw-singular",
            delta=0.9, norm_b=None, norm_sigma_x=0.0,
            singular_points=(tuple([0.0] * d),), params=params,
            sigma_jac_norm_fn=jac,
        )

    if field_id == "vortex-2d":
        if d not in (None, 2):
            raise FieldError("vortex-2d requires d = 2")
        sig, dr, jac = _vortex_2d()
        return CoefficientField(
            field_id, 2, 2, sig, dr, smoothness="raw-singular",
            delta=0.9, norm_b=0.0, norm_sigma_x=None,
            singular_points=((0.0, 0.0),), params=params,
            sigma_jac_norm_fn=jac,
        )

    if field_id == "block-vortex-3d":
        if d not in (None, 3):
            raise FieldError("block-vortex-3d requires d = 3")
        sig, dr, jac = _block_vortex_3d()
        return CoefficientField(
            field_id, 3, 9, sig, dr, smoothness="raw-singular",
            delta=0.9, norm_b=0.0, norm_sigma_x=None,
            singular_points=((0.0, 0.0, 0.0),), params=params,
            sigma_jac_norm_fn=jac,
        )

    raise FieldError(f"unknown or unsupported builtin field {field_id!r}")


# -- mollification ----------------------------------------------------------


def mollify(base, n, quad_order=8):
    """Convolve sigma and b with the rescaled mollifier kernel at level n.

    The result samples the base field on a fixed-order product quadrature
    over B_{1/n}, is flagged ``mollified`` and inherits ellipticity with
    delta/2 in place of delta.
    """
    if n < 1:
        raise FieldError("mollification level must be >= 1")
    kernel = Mollifier(base.d, order=quad_order)

    def sigma(x):
        out = kernel.average(base.sigma_fn, x, n)
        if not np.all(np.isfinite(out)):
            raise FieldError("non-finite sigma values inside mollifier support")
        return out

    def drift(x):
        out = kernel.average(base.drift_fn, x, n)
        if not np.all(np.isfinite(out)):
            raise FieldError("non-finite drift values inside mollifier support")
        return out

    return replace(
        base,
        sigma_fn=sigma,
        drift_fn=drift,
        smoothness="mollified",
        mollification_level=int(n),
        delta=base.delta / 2.0,
        params={**base.params, "mollified_from": base.label()},
        sigma_jac_norm_fn=None,
    )


def directional_derivative(field, x, l, component="drift", k=None):
    """sigma^k_(l)(x) or b_(l)(x) for a smooth or mollified field.

    Parameters
    ----------
    component : str
        ``"sigma"`` (requires column index ``k`` in 0..d1-1) or ``"drift"``.

    Returns
    -------
    d-vector (or (N, d) batch) of directional derivatives.
    """
    if component == "drift":
        return field.drift_directional(x, l)
    if component == "sigma":
        if k is None or not (0 <= k < field.d1):
            raise FieldError("sigma component needs a column index k in 0..d1-1")
        out = field.sigma_directional(x, l)
        return out[..., :, k]
    raise FieldError(f"unknown component {component!r}")
