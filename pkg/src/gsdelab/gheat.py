"""Explicit monotone finite differences for  u_t - G(u_xx) = 0,  u(0, .) = phi  (d = 1).

With G(b) = 1/2 (s_hi b^+ - s_lo b^-) each step is

    u_i <- u_i + dt * 1/2 (s_hi (D2u)_i^+ - s_lo (D2u)_i^-),

which is monotone as long as dt * s_hi / dx^2 <= 1.  Then u(t, x) is the
G-normal expectation E[phi(x + sqrt(t) X)].
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels
from .errors import CFLError, ValidationError
from .uncertainty import UncertaintySet

BOUNDARIES = {"linear-extrapolation": 0, "clamped": 1}


@dataclass(frozen=True)
class PdeConfig:
    """Grid for the 1-D G-heat equation on [-half_width, half_width].

    Boundary modes: ``linear-extrapolation`` puts a ghost node on the line
    through the two outermost nodes (zero curvature, so the edge values do
    not move); ``clamped`` reflects the ghost node (zero slope).
    """

    half_width: float
    n_x: int
    n_t: int
    sigma2_min: float
    sigma2_max: float
    boundary: str = "linear-extrapolation"

    def __post_init__(self):
        if not self.half_width > 0 or self.n_x < 3 or self.n_t < 1:
            raise ValidationError("need half_width > 0, n_x >= 3, n_t >= 1")
        if not 0 <= self.sigma2_min <= self.sigma2_max < math.inf:
            raise ValidationError("need 0 <= sigma2_min <= sigma2_max < inf")
        if self.boundary not in BOUNDARIES:
            raise ValidationError(f"unknown boundary mode {self.boundary!r}; use one of {sorted(BOUNDARIES)}")

    @classmethod
    def for_uncertainty(cls, uset: UncertaintySet, half_width: float, n_x: int, n_t: int,
                        boundary: str = "linear-extrapolation") -> "PdeConfig":
        lo, hi = uset.variance_bounds
        return cls(half_width, n_x, n_t, lo, hi, boundary)

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / (self.n_x - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(-self.half_width, self.half_width, self.n_x)

    def max_dt(self) -> float:
        return math.inf if self.sigma2_max == 0 else self.dx ** 2 / self.sigma2_max


def solve_gheat(cfg: PdeConfig, phi, t_final: float) -> np.ndarray:
    """u(t_final, x) on ``cfg.x``.

    ``phi`` is either the initial datum sampled on the grid or a callable.
    Raises :class:`CFLError` when dt = t_final / n_t breaks monotonicity.
    """
    if t_final < 0:
        raise ValidationError("t_final must be >= 0")
    u0 = np.asarray(phi(cfg.x) if callable(phi) else phi, dtype=np.float64)
    if u0.shape != (cfg.n_x,):
        raise ValidationError(f"initial datum must have {cfg.n_x} grid values")
    if t_final == 0:
        return u0.copy()
    dt = t_final / cfg.n_t
    max_dt = cfg.max_dt()
    if dt * cfg.sigma2_max > cfg.dx ** 2 * (1.0 + 1e-12):
        raise CFLError(
            f"dt = {dt:.6g} violates dt * sigma2_max / dx^2 <= 1; max admissible dt is {max_dt:.6g} "
            f"(n_t >= {math.ceil(t_final / max_dt)})", max_dt)
    return kernels.gheat_steps(u0, cfg.n_t, dt, cfg.dx, cfg.sigma2_min, cfg.sigma2_max, BOUNDARIES[cfg.boundary])


def cfl_steps(t_final: float, dx: float, sigma2_max: float, cfl: float = 0.9) -> int:
    """Smallest n_t with dt * sigma2_max / dx^2 <= cfl."""
    if sigma2_max == 0:
        return 1
    return max(1, math.ceil(t_final * sigma2_max / (cfl * dx * dx) - 1e-9))


def gnormal_expectation(uset: UncertaintySet, phi: Callable, t: float = 1.0, n_x: int = 401,
                        half_width: float | None = None, cfl: float = 0.9,
                        boundary: str = "linear-extrapolation") -> float:
    """E[phi(sqrt(t) X)] for G-normal X, read off as u(t, 0).

    The default domain half-width is 8 sqrt(sigma2_max t); ``n_x`` must be odd
    so that x = 0 is a grid node.
    """
    if n_x % 2 == 0:
        raise ValidationError("n_x must be odd so that x = 0 is a grid node")
    lo, hi = uset.variance_bounds
    L = half_width if half_width is not None else 8.0 * math.sqrt(max(hi, 1e-12) * t)
    dx = 2.0 * L / (n_x - 1)
    cfg = PdeConfig(L, n_x, cfl_steps(t, dx, hi, cfl), lo, hi, boundary)
    u = solve_gheat(cfg, phi, t)
    return float(u[n_x // 2])


def write_slice_csv(x, u, dest) -> None:
    with open(dest, "w") as fh:
        fh.write("x,u\n")
        for xi, ui in zip(x, u):
            fh.write(f"{float(xi)!r},{float(ui)!r}\n")
