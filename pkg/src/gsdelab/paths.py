"""Pathwise G-Brownian motion under a fixed scenario, and discrete integrals."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import ValidationError
from .rng import brownian_increments
from .uncertainty import ScenarioControl, UncertaintySet


@dataclass(frozen=True)
class TimeGrid:
    horizon: float
    n_steps: int

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValidationError("time horizon must be positive")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValidationError("n_steps must be a positive integer")

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


@dataclass(frozen=True, eq=False)
class PathBundle:
    """Sampled paths of B and <B> under one scenario.

    Arrays: ``w`` standard noise increments (n_paths, n_steps, d), each entry
    N(0, dt); ``db`` = gamma_k w_k; ``b_path`` (n_paths, n_steps + 1, d);
    ``dqv`` = gamma_k gamma_k^T dt (n_steps, d, d) and its running sum
    ``qv_path``.  The quadratic variation does not depend on the noise.
    """

    grid: TimeGrid
    scenario: ScenarioControl
    w: np.ndarray
    db: np.ndarray
    b_path: np.ndarray
    dqv: np.ndarray
    qv_path: np.ndarray
    seed: int
    path_start: int = 0

    @property
    def n_paths(self) -> int:
        return self.w.shape[0]

    @property
    def dim(self) -> int:
        return self.w.shape[2]

    def terminal(self) -> np.ndarray:
        return self.b_path[:, -1, :]


def _freeze(*arrays):
    for a in arrays:
        a.setflags(write=False)


def scenario_matrices(uset: UncertaintySet, scenario: ScenarioControl) -> np.ndarray:
    """Per-step volatility matrices, shape (n_steps, d, d)."""
    if scenario.mode != "open_loop":
        raise ValidationError("path simulation needs an open-loop control")
    scenario.validate(uset)
    g = np.stack(uset.gammas)
    return g[np.asarray(scenario.indices, dtype=np.int64)]


def bundle_from_noise(uset: UncertaintySet, scenario: ScenarioControl, grid: TimeGrid,
                      w: np.ndarray, seed: int, path_start: int = 0) -> PathBundle:
    """Build a bundle from given N(0, dt) increments (common random numbers)."""
    if scenario.n_steps != grid.n_steps or not np.isclose(scenario.horizon, grid.horizon, rtol=1e-14, atol=0):
        raise ValidationError(
            f"scenario grid ({scenario.horizon}, {scenario.n_steps}) does not match "
            f"time grid ({grid.horizon}, {grid.n_steps})")
    if w.ndim != 3 or w.shape[1] != grid.n_steps or w.shape[2] != uset.dim:
        raise ValidationError(f"noise shape {w.shape} incompatible with grid/dimension")
    gam = scenario_matrices(uset, scenario)
    db = np.einsum("kij,pkj->pki", gam, w) if uset.dim > 1 else w * gam[:, 0, 0][None, :, None]
    b_path = np.zeros((w.shape[0], grid.n_steps + 1, uset.dim))
    np.cumsum(db, axis=1, out=b_path[:, 1:, :])
    dqv = np.einsum("kij,klj->kil", gam, gam) * grid.dt
    qv_path = np.zeros((grid.n_steps + 1, uset.dim, uset.dim))
    np.cumsum(dqv, axis=0, out=qv_path[1:])
    _freeze(db, b_path, dqv, qv_path)
    return PathBundle(grid, scenario, w, db, b_path, dqv, qv_path, int(seed), int(path_start))


def simulate_path(uset: UncertaintySet, scenario: ScenarioControl, grid: TimeGrid, seed: int,
                  n_paths: int = 1, path_start: int = 0, threads: int = 1) -> PathBundle:
    """Simulate ``n_paths`` trajectories of B under ``scenario``.

    B_{k+1} = B_k + gamma_k w_k with w_k ~ N(0, dt I) drawn from the
    counter-based stream keyed by ``seed``; deterministic in
    (seed, path index, scenario, grid).
    """
    if n_paths < 1:
        raise ValidationError("n_paths must be >= 1")
    w = brownian_increments(seed, n_paths, grid.n_steps, uset.dim, grid.dt, path_start, threads)
    _freeze(w)
    return bundle_from_noise(uset, scenario, grid, w, seed, path_start)


def _per_step(integrand, n_paths: int, n_steps: int) -> np.ndarray:
    eta = np.asarray(integrand, dtype=np.float64)
    if eta.ndim == 0:
        return np.full((n_paths, n_steps), float(eta))
    if eta.ndim == 1:
        eta = eta[None, :]
    if eta.shape[-1] == n_steps + 1:
        eta = eta[..., :-1]
    if eta.shape[-1] != n_steps:
        raise ValidationError(f"integrand has {eta.shape[-1]} nodes, expected {n_steps} (or {n_steps + 1})")
    return np.broadcast_to(eta, (n_paths, n_steps))


def ito_integral(integrand, bundle: PathBundle, direction) -> np.ndarray:
    """Left-point sum  sum_k eta_k (B^a_{k+1} - B^a_k), one value per path.

    ``integrand`` is a scalar, a per-node vector shared by all paths, or an
    array (n_paths, nodes); a trailing terminal node is ignored.
    """
    a = np.asarray(direction, dtype=np.float64).reshape(-1)
    if a.shape[0] != bundle.dim:
        raise ValidationError("direction has the wrong dimension")
    eta = _per_step(integrand, bundle.n_paths, bundle.grid.n_steps)
    dba = bundle.db @ a
    return np.sum(eta * dba, axis=1)


def qv_integral(integrand, bundle: PathBundle, i: int, j: int) -> np.ndarray:
    """Left-point Stieltjes sum against the exact increments of <B^i, B^j>."""
    d = bundle.dim
    if not (0 <= i < d and 0 <= j < d):
        raise ValidationError(f"component indices must lie in [0, {d})")
    eta = _per_step(integrand, bundle.n_paths, bundle.grid.n_steps)
    return np.sum(eta * bundle.dqv[None, :, i, j], axis=1)


def directional_qv(bundle: PathBundle, a, abar=None) -> np.ndarray:
    """<B^a, B^abar> at the nodes (defaults to <B^a>)."""
    a = np.asarray(a, dtype=np.float64)
    abar = a if abar is None else np.asarray(abar, dtype=np.float64)
    return np.einsum("i,kij,j->k", a, bundle.qv_path, abar)


class SmoothFunction(NamedTuple):
    """A C^2 test function given by value, gradient and Hessian callables.

    Each callable takes x of shape (..., n) and returns shapes (...),
    (..., n) and (..., n, n) respectively.
    """

    value: Callable
    grad: Callable
    hess: Callable


def _coef(c, t, x, shape):
    if callable(c):
        out = np.asarray(c(t, x), dtype=np.float64)
    else:
        out = np.asarray(c, dtype=np.float64)
    return np.broadcast_to(out, shape)


def ito_formula_residual(bundle: PathBundle, phi: SmoothFunction, x0, alpha=0.0, eta=0.0,
                         beta=None) -> np.ndarray:
    """Pathwise |Phi(X_T) - Phi(X_0) - (four discretised integrals)|.

    X is the left-point discretisation of
    dX = alpha dt + eta_ij d<B^i, B^j> + beta_j dB^j on the bundle's paths.
    Coefficients are constants, arrays or callables ``(t, x)`` with shapes
    alpha (n,), eta (n, d, d), beta (n, d); ``beta`` defaults to the identity
    (X = x0 + B when n = d).
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))
    n, d, P = x0.shape[0], bundle.dim, bundle.n_paths
    if beta is None:
        if n != d:
            raise ValidationError("beta must be given when n != d")
        beta = np.eye(d)
    dt = bundle.grid.dt
    times = bundle.grid.times
    x = np.broadcast_to(x0, (P, n)).copy()
    rhs = np.zeros(P)
    phi0 = np.asarray(phi.value(x), dtype=np.float64).copy()
    for k in range(bundle.grid.n_steps):
        t = times[k]
        al = _coef(alpha, t, x, (P, n))
        et = _coef(eta, t, x, (P, n, d, d))
        be = _coef(beta, t, x, (P, n, d))
        dq = bundle.dqv[k]
        dB = bundle.db[:, k, :]
        gr = np.asarray(phi.grad(x), dtype=np.float64).reshape(P, n)
        he = np.asarray(phi.hess(x), dtype=np.float64).reshape(P, n, n)
        dx_qv = np.einsum("pnij,ij->pn", et, dq)
        dx_b = np.einsum("pnj,pj->pn", be, dB)
        term = (np.einsum("pn,pn->p", gr, al) * dt
                + np.einsum("pn,pn->p", gr, dx_qv)
                + np.einsum("pn,pn->p", gr, dx_b)
                + 0.5 * np.einsum("pmn,pmi,pnj,ij->p", he, be, be, dq))
        rhs = rhs + term
        x = x + (al * dt + dx_qv + dx_b)
    return np.abs(np.asarray(phi.value(x), dtype=np.float64) - phi0 - rhs)


def upper_mean(samples: np.ndarray) -> np.ndarray:
    """Max over the scenario axis (0) of path means (axis 1)."""
    return np.max(np.mean(samples, axis=1), axis=0)


def mg_norm(samples, grid: TimeGrid, p: float = 2.0, estimator: Callable | None = None) -> float:
    """Discrete M_G^p norm  (1/T sum_k E[|eta_{t_k}|^p] dt)^{1/p}.

    ``samples`` has shape (n_scenarios, n_paths, n_nodes) (a 2-D array is a
    single scenario).  ``estimator`` maps such an array of |eta|^p values to
    the per-node upper expectation; defaults to the max of scenario means.
    """
    if p < 1:
        raise ValidationError("the M_G^p norm needs p >= 1")
    s = np.asarray(samples, dtype=np.float64)
    if s.ndim == 2:
        s = s[None]
    if s.shape[-1] not in (grid.n_steps, grid.n_steps + 1):
        raise ValidationError("samples must have one value per grid node")
    est = estimator or upper_mean
    e = np.asarray(est(np.abs(s[..., :grid.n_steps]) ** p))
    return float((np.sum(e) * grid.dt / grid.horizon) ** (1.0 / p))


def _path_header(d: int) -> list:
    header = ["t"] + [f"B_{i + 1}" for i in range(d)]
    header += [f"qv_{i + 1}{j + 1}" for i in range(d) for j in range(d)]
    return header + ["scenario_id", "seed"]


def _path_rows(bundle: PathBundle, path_index: int, scenario_id: int):
    for k, t in enumerate(bundle.grid.times):
        row = [repr(float(t))] + [repr(float(v)) for v in bundle.b_path[path_index, k]]
        row += [repr(float(v)) for v in bundle.qv_path[k].reshape(-1)]
        yield row + [scenario_id, bundle.seed]


def export_csv(bundle: PathBundle, dest, path_index: int = 0, scenario_id: int = 0) -> None:
    """Write one path as CSV: t, B_1..B_d, qv_11..qv_dd, scenario_id, seed."""
    export_many_csv([bundle], dest, path_index, [scenario_id])


def export_many_csv(bundles, dest, path_index: int = 0, scenario_ids=None) -> None:
    """Same columns as :func:`export_csv`, one block of rows per bundle."""
    bundles = list(bundles)
    ids = range(len(bundles)) if scenario_ids is None else scenario_ids
    with open(dest, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(_path_header(bundles[0].dim))
        for b, sid in zip(bundles, ids):
            wr.writerows(_path_rows(b, path_index, sid))
