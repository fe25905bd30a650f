"""Lattice solver for G-BSDEs in d = 1.

Y_t = E[xi + int f(s, Y) ds + int g(s, Y) d<B> | F_t] is solved by Picard
iteration in Y starting from Y^0 = 0.  Each stage is one backward pass of
the lattice dynamic programme, where at step k

    Y^{m+1}_k = max_gamma [ E_gamma Y^{m+1}_{k+1} + g(t_k, Y^m_k) gamma^2 dt ] + f(t_k, Y^m_k) dt,

so one gamma drives both the conditional expectation and the d<B> weight.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import NumericalAbort, ValidationError
from ..expectation import Lattice
from ..moduli import Modulus
from ..paths import TimeGrid
from ..uncertainty import UncertaintySet


def _zero(t, y):
    return np.zeros_like(y)


@dataclass(frozen=True)
class BsdeProblem:
    xi: Callable
    grid: TimeGrid
    uset: UncertaintySet
    f: Callable = _zero
    g: Callable = _zero
    c_growth: float | None = None
    beta_bound: float | None = None
    rho: Modulus | None = None

    def __post_init__(self):
        if self.uset.dim != 1:
            raise ValidationError("the lattice G-BSDE solver supports d = 1 only")
        if self.rho is not None:
            for flag in ("concave", "increasing"):
                if not getattr(self.rho, flag):
                    raise ValidationError(f"driver modulus {self.rho.name} is not {flag}")
            if self.rho.osgood is False:
                raise ValidationError(f"driver modulus {self.rho.name} is not Osgood")
        if self.c_growth is not None:
            y = np.linspace(-10, 10, 201)
            for t in np.linspace(0, self.grid.horizon, 5):
                lhs = np.abs(self.f(t, y)) + np.abs(self.g(t, y))
                if np.any(lhs > (self.beta_bound or 0.0) + self.c_growth * np.abs(y) + 1e-12):
                    raise ValidationError("drivers violate |f| + |g| <= beta + c|y| on samples")


@dataclass
class BsdeResult:
    layers: list
    errors: list = field(default_factory=list)
    converged: bool = False
    lattice: Lattice | None = None

    @property
    def stages(self) -> int:
        return len(self.errors)

    @property
    def y0(self) -> float:
        return float(self.layers[0][0])


def _stage(lat: Lattice, problem: BsdeProblem, terminal: np.ndarray, prev: list) -> list:
    times = problem.grid.times
    v = terminal
    out = [None] * (lat.n_steps + 1)
    out[-1] = v
    for k in range(lat.n_steps - 1, -1, -1):
        y = prev[k]
        gv = np.asarray(problem.g(times[k], y), dtype=np.float64)
        fv = np.asarray(problem.f(times[k], y), dtype=np.float64)
        v, _ = lat.step(v, gv, fv)
        out[k] = v
    return out


def bsde_solve(problem: BsdeProblem, n_iter: int = 50, tol: float = 1e-12, dx_scale: float = 1.0,
               terminal=None) -> BsdeResult:
    """Picard-in-Y lattice solution; ``terminal`` overrides xi with node values."""
    lat = Lattice(problem.grid, problem.uset, dx_scale)
    n = lat.n_steps
    if terminal is None:
        terminal = np.asarray(problem.xi(lat.states(n)), dtype=np.float64)
    terminal = np.asarray(terminal, dtype=np.float64)
    if terminal.shape != (2 * n + 1,) or not np.all(np.isfinite(terminal)):
        raise ValidationError("terminal values must be finite with one value per final node")
    y = [np.zeros(2 * k + 1) for k in range(n + 1)]
    res = BsdeResult(layers=y, lattice=lat)
    for m in range(n_iter):
        nxt = _stage(lat, problem, terminal, y)
        err = max(float(np.max(np.abs(a - b))) for a, b in zip(nxt, y))
        res.errors.append(err)
        y = nxt
        if not np.isfinite(err):
            raise NumericalAbort("BSDE iterate is not finite", stage=f"stage {m}", diagnostics={"errors": res.errors})
        if err <= tol:
            res.converged = True
            break
    res.layers = y
    if not res.converged:
        raise NumericalAbort(f"BSDE Picard iteration did not reach {tol:g} in {n_iter} stages",
                             stage="bsde", diagnostics={"errors": res.errors})
    return res
