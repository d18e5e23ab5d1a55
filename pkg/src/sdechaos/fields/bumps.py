"""Smooth bump functions and the mollifier kernel.

Two distinct bumps are used throughout:

* ``cutoff_bump`` -- the cutoff appearing in the built-in example
  equations: smooth, bounded by 1, vanishing outside a ball of radius 1/2.
* ``Mollifier`` -- the nonnegative kernel with unit integral and support in
  the unit ball used to smooth coefficient fields by convolution.
"""

from __future__ import annotations

from functools import lru_cache
from math import gamma, pi

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad

__all__ = ["cutoff_bump", "cutoff_bump_gradient", "Mollifier"]


def _bump_profile(u):
    """exp(1 - 1/(1 - u)) for u in [0, 1), 0 for u >= 1; u = (r/radius)^2."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = u < 1.0
    ui = u[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ui))
    return out


def cutoff_bump(x, radius=0.5):
    """Smooth cutoff with values in [0, 1], equal to 1 at 0, support B_radius.

    Parameters
    ----------
    x : array of shape (..., d)
        Evaluation points.
    radius : float
        Support radius.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    r2 = np.sum(x * x, axis=-1)
    return _bump_profile(r2 / radius**2)


def cutoff_bump_gradient(x, radius=0.5):
    """Gradient of :func:`cutoff_bump`, shape (..., d)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    u = np.sum(x * x, axis=-1) / radius**2
    val = _bump_profile(u)
    fac = np.zeros_like(u)
    inside = u < 1.0
    fac[inside] = -val[inside] * 2.0 / radius**2 / (1.0 - u[inside]) ** 2
    return fac[..., None] * x


def _sphere_area(d):
    """Surface area of the unit sphere in R^d."""
    return 2.0 * pi ** (d / 2.0) / gamma(d / 2.0)


@lru_cache(maxsize=8)
def _mollifier_norm(d):
    """Integral over B_1 of exp(-1/(1-|x|^2)) in dimension d."""
    val, _ = quad(lambda r: r ** (d - 1) * np.exp(-1.0 / (1.0 - r * r)), 0.0, 1.0)
    return _sphere_area(d) * val


@lru_cache(maxsize=8)
def _mollifier_nodes(d, order):
    """Tensor Gauss-Legendre nodes/weights on [-1,1]^d weighted by the kernel.

    Weights are renormalized to sum to exactly 1 so averaging a constant
    field reproduces it bit-for-bit.
    """
    x1, w1 = leggauss(order)
    grids = np.meshgrid(*([x1] * d), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    wgrids = np.meshgrid(*([w1] * d), indexing="ij")
    w = np.ones(nodes.shape[0])
    for g in wgrids:
        w = w * g.ravel()
    r2 = np.sum(nodes * nodes, axis=-1)
    kern = np.zeros_like(r2)
    inside = r2 < 1.0
    kern[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    w = w * kern
    keep = w > 0.0
    nodes, w = nodes[keep], w[keep]
    return nodes, w / np.sum(w)


class Mollifier:
    """Nonnegative smooth kernel with unit integral and support in B_1.

    ``value`` evaluates the normalized kernel itself; ``average`` computes
    the convolution of a vectorized function against the rescaled kernel
    n^d k(n y) by fixed-order product Gauss-Legendre quadrature over the
    support ball B_{1/n}.
    """

    def __init__(self, d, order=8):
        self.d = d
        self.order = order
        self.nodes, self.weights = _mollifier_nodes(d, order)

    def value(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        r2 = np.sum(x * x, axis=-1)
        out = np.zeros_like(r2)
        inside = r2 < 1.0
        out[inside] = np.exp(-1.0 / (1.0 - r2[inside])) / _mollifier_norm(self.d)
        return out

    def average(self, func, x, n):
        """Quadrature value of (func * kernel_n)(x) for a batch of points.

        Parameters
        ----------
        func : callable
            Maps an (N, d) array to an array whose first axis has length N.
        x : array of shape (N, d)
        n : int
            Mollification level; the kernel support radius is 1/n.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        npts = x.shape[0]
        shifted = x[:, None, :] - self.nodes[None, :, :] / float(n)
        vals = func(shifted.reshape(npts * len(self.weights), self.d))
        vals = np.asarray(vals)
        vals = vals.reshape((npts, len(self.weights)) + vals.shape[1:])
        return np.tensordot(vals, self.weights, axes=([1], [0]))
