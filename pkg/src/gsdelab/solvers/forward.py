"""Per-scenario Euler scheme for forward G-SDEs.

X_{k+1} = X_k + [(b dt + sum_ij h_ij dqv_ij) + sum_j sigma_j dB_j](t_k, X_k)

The bracketed increment is computed by :func:`increments`, which the Picard
solvers reuse, so a Picard fixed point reproduces the Euler path bitwise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..coefficients import CoefficientSet
from ..errors import NumericalAbort, ValidationError
from ..expectation import MonteCarloSetup
from ..paths import PathBundle, TimeGrid, simulate_path
from ..uncertainty import ScenarioControl, UncertaintySet


@dataclass(frozen=True)
class SdeProblem:
    coefficients: CoefficientSet
    x0: np.ndarray
    grid: TimeGrid
    uset: UncertaintySet

    def __post_init__(self):
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=np.float64)).copy()
        x0.setflags(write=False)
        object.__setattr__(self, "x0", x0)
        c = self.coefficients
        if x0.shape != (c.n,):
            raise ValidationError(f"initial condition has shape {x0.shape}, coefficients need ({c.n},)")
        if c.d != self.uset.dim:
            raise ValidationError(f"{c.d} diffusion coefficients but the uncertainty set has d = {self.uset.dim}")

    @property
    def regime(self) -> str:
        return self.coefficients.regime

    def with_x0(self, x0) -> "SdeProblem":
        return SdeProblem(self.coefficients, x0, self.grid, self.uset)


def increments(coeffs: CoefficientSet, t, x, db, dqv, dt: float, drift_only: bool = False,
               diffusion_only: bool = False) -> np.ndarray:
    """Euler increments for states x (..., K, n), noise db (..., K, d), dqv (K, d, d).

    ``t`` broadcasts against x[..., 0:1].  With ``drift_only`` the sigma part is
    skipped; with ``diffusion_only`` only sum_j sigma_j dB_j is returned.
    """
    out = None
    if not diffusion_only:
        out = coeffs.b(t, x) * dt
        for (i, j), hterm in coeffs.h.items():
            if hterm.is_zero:
                continue
            out = out + hterm(t, x) * dqv[:, i, j][:, None]
        if drift_only:
            return out
    ds = None
    for j, s in enumerate(coeffs.sigma):
        if s.is_zero:
            continue
        term = s(t, x) * db[..., j:j + 1]
        ds = term if ds is None else ds + term
    if ds is None:
        return out if out is not None else np.zeros_like(x)
    return ds if out is None else out + ds


def _abort_nonfinite(x_next, t, x_prev, stage):
    bad = ~np.all(np.isfinite(x_next), axis=-1)
    if np.any(bad):
        idx = np.argwhere(bad)[0]
        raise NumericalAbort(
            f"non-finite coefficient evaluation at t = {t:g}, x = {x_prev[tuple(idx)].tolist()}",
            stage=stage, diagnostics={"t": float(t), "x": x_prev[tuple(idx)].tolist(), "index": idx.tolist()})


def euler_from_bundle(problem: SdeProblem, bundle: PathBundle) -> np.ndarray:
    """Euler path (n_paths, n_steps + 1, n) along the paths of ``bundle``."""
    grid = problem.grid
    if bundle.grid != grid:
        raise ValidationError("bundle grid differs from the problem grid")
    n_paths, n = bundle.n_paths, problem.coefficients.n
    times = grid.times
    x = np.empty((n_paths, grid.n_steps + 1, n))
    x[:, 0, :] = problem.x0
    dqv = bundle.dqv
    for k in range(grid.n_steps):
        xk = x[:, k, :]
        inc = increments(problem.coefficients, times[k], xk, bundle.db[:, k, :], dqv[k:k + 1], grid.dt)
        x[:, k + 1, :] = xk + inc
        _abort_nonfinite(x[:, k + 1, :], times[k], xk, "euler")
    return x


def euler_solve(problem: SdeProblem, scenario: ScenarioControl, seed: int, n_paths: int = 1,
                path_start: int = 0, threads: int = 1) -> np.ndarray:
    """Euler solution at the grid nodes, shape (n_paths, n_steps + 1, n); deterministic in (seed, scenario)."""
    bundle = simulate_path(problem.uset, scenario, problem.grid, seed, n_paths, path_start, threads)
    return euler_from_bundle(problem, bundle)


def euler_all(problem: SdeProblem, setup: MonteCarloSetup) -> np.ndarray:
    """Euler solutions for every scenario of ``setup``: (S, P, N + 1, n)."""
    return np.stack([euler_from_bundle(problem, setup.bundle(c)) for c in setup.controls])


def scenario_noise(setup: MonteCarloSetup):
    """(db (S, P, N, d), dqv (S, N, d, d)) for all scenarios of ``setup``."""
    bundles = [setup.bundle(c) for c in setup.controls]
    return np.stack([b.db for b in bundles]), np.stack([b.dqv for b in bundles])
