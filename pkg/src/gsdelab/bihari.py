"""Bihari inequality engine.

For u(t) <= a + int_0^t beta(s) rho(u(s)) ds the bound is
u(t) <= v^{-1}(v(a) + int_0^t beta), v(x) = int_{t0}^x ds / rho(s).
v is tabulated by adaptive quadrature in the variable z = ln s on a
log-spaced node set and inverted by bracketing on the table followed by
Brent's method inside the bracket.
"""
from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize

from .errors import ValidationError
from .moduli import Modulus

_TINY = 5e-324


class StepFunction:
    """Right-continuous step function on [0, inf): value ``values[i]`` on
    [breaks[i], breaks[i+1]) with breaks[0] = 0."""

    def __init__(self, breaks: Sequence[float], values: Sequence[float]):
        self.breaks = np.asarray(breaks, dtype=np.float64)
        self.values = np.asarray(values, dtype=np.float64)
        if self.breaks.ndim != 1 or self.breaks.shape != self.values.shape or self.breaks[0] != 0.0:
            raise ValidationError("step function needs matching breaks/values with breaks[0] = 0")
        if np.any(np.diff(self.breaks) <= 0):
            raise ValidationError("step function breaks must increase")
        if np.any(self.values < 0):
            raise ValidationError("beta must be non-negative")

    def __call__(self, t):
        i = np.searchsorted(self.breaks, np.asarray(t, dtype=np.float64), side="right") - 1
        return self.values[np.clip(i, 0, None)]

    def integral(self, t: float) -> float:
        t = float(t)
        edges = np.minimum(np.append(self.breaks[1:], math.inf), t)
        widths = np.clip(edges - self.breaks, 0.0, None)
        return float(np.dot(widths, self.values))

    @classmethod
    def random(cls, rng: np.random.Generator, horizon: float = 1.0, n_pieces: int = 5, vmax: float = 2.0):
        inner = np.sort(rng.uniform(0.0, horizon, n_pieces - 1))
        return cls(np.concatenate([[0.0], inner]), rng.uniform(0.0, vmax, n_pieces))


def beta_integral(beta, t: float) -> float:
    """int_0^t beta(s) ds for a constant, a StepFunction or a callable."""
    if t < 0:
        raise ValidationError("t must be >= 0")
    if isinstance(beta, StepFunction):
        return beta.integral(t)
    if callable(beta):
        val, _ = integrate.quad(lambda s: float(beta(s)), 0.0, t, limit=200)
        return float(val)
    b = float(beta)
    if b < 0:
        raise ValidationError("beta must be non-negative")
    return b * t


class BihariEnvelope:
    """Tabulated v / v^{-1} for one modulus, plus a coefficient path beta.

    ``anchor`` is t0 (default 1); the bound does not depend on it.
    """

    def __init__(self, rho: Modulus, beta=1.0, anchor: float = 1.0, r_min: float = 1e-150,
                 r_max: float = 1e12, nodes_per_unit: float = 1.0):
        if not anchor > 0:
            raise ValidationError("anchor t0 must be > 0")
        self.rho = rho
        self.beta = beta
        self.anchor = float(anchor)
        self.r_max = min(float(r_max), rho.r_max)
        self.r_min = float(r_min)
        z_lo, z_hi = math.log(self.r_min), math.log(self.r_max)
        n = max(16, int((z_hi - z_lo) * nodes_per_unit))
        extra = [math.log(b) for b in rho.breakpoints if self.r_min < b < self.r_max]
        z = np.unique(np.concatenate([np.linspace(z_lo, z_hi, n), extra, [math.log(self.anchor)]]))
        inc = np.array([self._seg(a, b) for a, b in zip(z[:-1], z[1:])])
        if np.any(inc <= 0) or not np.all(np.isfinite(inc)):
            raise ValidationError(f"1/rho is not positive and finite on the working domain for {rho.name}")
        table = np.concatenate([[0.0], np.cumsum(inc)])
        i0 = int(np.searchsorted(z, math.log(self.anchor)))
        self._z = z
        self._v = table - table[i0]

    def _integrand(self, z: float) -> float:
        s = math.exp(z)
        return s / float(self.rho(np.array([s]))[0])

    def _seg(self, a: float, b: float) -> float:
        val, _ = integrate.quad(self._integrand, a, b, limit=200, epsabs=0.0, epsrel=1e-13)
        return val

    def v(self, x: float) -> float:
        if not x > 0:
            raise ValidationError("v is defined for x > 0")
        z = math.log(x)
        i = int(np.clip(np.searchsorted(self._z, z) - 1, 0, len(self._z) - 1))
        if z > self._z[-1]:
            i = len(self._z) - 1
        return float(self._v[i] + self._seg(self._z[i], z))

    def v_inv(self, y: float) -> tuple[float, bool]:
        """Return (x, overflow) with v(x) = y; overflow when y is beyond v(r_max)."""
        if y >= self._v[-1]:
            if y == self._v[-1]:
                return self.r_max, False
            return self.r_max, True
        if y < self._v[0]:
            lo, hi = math.log(_TINY), self._z[0]
            base, zb = self._v[0], self._z[0]
            if base + self._seg(zb, lo) > y:
                return 0.0, False
        else:
            i = int(np.searchsorted(self._v, y, side="right") - 1)
            lo, hi = self._z[i], self._z[i + 1]
            base, zb = self._v[i], self._z[i]
            if y == base:
                return math.exp(lo), False
        # table cumsum and a fresh quad can disagree in the last bits near a node
        if base + self._seg(zb, hi) - y <= 0.0:
            return math.exp(hi), False
        z = optimize.brentq(lambda zz: base + self._seg(zb, zz) - y, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps,
                            maxiter=200)
        return math.exp(z), False

    def bound(self, a: float, t: float, beta_int: float | None = None) -> tuple[float, bool]:
        """(v^{-1}(v(a) + int_0^t beta), overflow flag); a = 0 gives 0.

        0 < a < r_min is evaluated at r_min.
        """
        a = float(a)
        if a < 0 or math.isnan(a):
            raise ValidationError("a must be >= 0")
        if a == 0.0:
            return 0.0, False
        c = beta_integral(self.beta, t) if beta_int is None else float(beta_int)
        if a >= self.r_max:
            return self.r_max, True
        # the bound is nondecreasing in a, so raising a tiny a keeps it valid
        a = max(a, self.r_min)
        return self.v_inv(self.v(a) + c)

    def curve(self, a: float, times: Sequence[float]) -> np.ndarray:
        return np.array([self.bound(a, t)[0] for t in times])


def bihari_bound(env: BihariEnvelope, a: float, t: float) -> float:
    """v^{-1}(v(a) + int_0^t beta); see :meth:`BihariEnvelope.bound`."""
    return env.bound(a, t)[0]


def bihari_staged(env: BihariEnvelope, a: Sequence[float], times: Sequence[float], scale: float = 1.0) -> np.ndarray:
    """Bound for u(t) <= a(t) + scale int_0^t beta rho(u) with a(t) nondecreasing."""
    return np.array([env.bound(ak, 0.0, beta_int=scale * beta_integral(env.beta, t))[0] for ak, t in zip(a, times)])


def iterated_envelope(rho: Callable, c: float, beta2, grid_times: np.ndarray, e0_profile, n_iter: int) -> np.ndarray:
    """Discrete Picard envelopes E_0 = e0_profile,
    E_{m+1}(t_k) = c sum_{i<k} beta2(t_i) rho(E_m(t_i)) dt.

    Returns an (n_iter, n_nodes) array of nondecreasing profiles.
    """
    t = np.asarray(grid_times, dtype=np.float64)
    dt = np.diff(t)
    b2 = np.broadcast_to(np.asarray(beta2(t[:-1]) if callable(beta2) else beta2, dtype=np.float64), dt.shape)
    env = np.empty((n_iter, t.size))
    cur = np.maximum.accumulate(np.broadcast_to(np.asarray(e0_profile, dtype=np.float64), t.shape))
    for m in range(n_iter):
        env[m] = cur
        nxt = np.zeros_like(cur)
        np.cumsum(c * b2 * np.asarray(rho(cur[:-1]), dtype=np.float64) * dt, out=nxt[1:])
        cur = nxt
    return env
