"""Mollification by a compactly supported smooth bump.

J(x) = c exp(-1 / (1 - |x|^2)) on the unit ball, J_w(x) = w^-n J(x / w).
g_w = J_w * g is evaluated with a tensor Gauss-Legendre rule on the cube
[-w, w]^n whose weights are multiplied by J and renormalised to sum 1, so
constants are reproduced to rounding and (the rule being symmetric) so are
affine functions.
"""
from __future__ import annotations

import math
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import ValidationError

DEFAULT_POINTS = {1: 96, 2: 32, 3: 14}


def bump(x) -> np.ndarray:
    """Unnormalised bump exp(-1/(1-|x|^2)) on the unit ball; x has shape (..., n)."""
    x = np.asarray(x, dtype=np.float64)
    r2 = np.sum(x * x, axis=-1)
    inside = r2 < 1.0
    out = np.zeros_like(r2)
    out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return out


@lru_cache(maxsize=None)
def _rule(n: int, q: int):
    z, wt = np.polynomial.legendre.leggauss(q)
    grids = np.meshgrid(*([z] * n), indexing="ij")
    pts = np.stack([g.reshape(-1) for g in grids], axis=-1)
    wts = np.ones(pts.shape[0])
    for k in range(n):
        wts = wts * np.meshgrid(*([wt] * n), indexing="ij")[k].reshape(-1)
    wts = wts * bump(pts)
    keep = wts > 0
    pts, wts = pts[keep], wts[keep]
    wts = wts / wts.sum()
    pts.setflags(write=False)
    wts.setflags(write=False)
    return pts, wts


@lru_cache(maxsize=None)
def gradient_constant(n: int) -> float:
    """int |grad J| over the unit ball for the normalised kernel J."""
    if n == 1:
        z, wt = np.polynomial.legendre.leggauss(400)
        mass = float(np.dot(wt, bump(z[:, None])))
        return 2.0 * math.exp(-1.0) / mass
    # radial: J = c f(r), int |grad J| = c |S^{n-1}| int_0^1 |f'(r)| r^{n-1} dr = c |S^{n-1}| int_0^1 f(r) (n-1) r^{n-2} dr
    z, wt = np.polynomial.legendre.leggauss(400)
    r = 0.5 * (z + 1.0)
    w = 0.5 * wt
    f = np.exp(-1.0 / (1.0 - r * r))
    area = 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)
    mass = area * float(np.dot(w, f * r ** (n - 1)))
    grad = area * float(np.dot(w, f * (n - 1) * r ** (n - 2)))
    return grad / mass


class Mollified:
    """Callable g_w with the Lipschitz bound sup|g| * gradient_constant(n) / w."""

    def __init__(self, g: Callable, width: float, n: int = 1, quad_points: int | None = None):
        if not width > 0:
            raise ValidationError("mollifier width must be > 0")
        if n < 1 or n > 3:
            raise ValidationError("mollification supports n <= 3")
        self.g = g
        self.width = float(width)
        self.n = int(n)
        self.quad_points = int(quad_points or DEFAULT_POINTS[self.n])
        self._pts, self._wts = _rule(self.n, self.quad_points)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        scalar_input = self.n == 1 and (x.ndim == 0 or x.shape[-1:] != (1,))
        xs = x.reshape(-1, self.n) if not scalar_input else x.reshape(-1, 1)
        ys = xs[:, None, :] - self.width * self._pts[None, :, :]
        vals = np.asarray(self.g(ys[..., 0] if scalar_input else ys), dtype=np.float64)
        out = vals @ self._wts
        return out.reshape(x.shape if scalar_input else x.shape[:-1])

    def lipschitz_bound(self, sup_g: float) -> float:
        return float(sup_g) * gradient_constant(self.n) / self.width


def mollify(g: Callable, width: float, n: int = 1, quad_points: int | None = None) -> Mollified:
    """g_w(x) = int J_w(x - y) g(y) dy.  For n = 1, g takes and returns flat
    arrays; otherwise g takes (..., n) arrays."""
    return Mollified(g, width, n, quad_points)


def brute_force_mollify(g: Callable, width: float, x: np.ndarray, n_fine: int = 200001) -> np.ndarray:
    """Reference n = 1 convolution by a fine composite trapezoid rule."""
    y = np.linspace(-width, width, n_fine)
    k = bump(y[:, None] / width)
    k = k / np.trapezoid(k, y) if hasattr(np, "trapezoid") else k / np.trapz(k, y)
    x = np.asarray(x, dtype=np.float64)
    out = np.empty(x.shape)
    for idx, xv in np.ndenumerate(x):
        vals = k * g(xv - y)
        out[idx] = np.trapezoid(vals, y) if hasattr(np, "trapezoid") else np.trapz(vals, y)
    return out
