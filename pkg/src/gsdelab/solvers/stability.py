"""Stability of the Euler solution map under perturbed initial conditions.

Both solutions share scenarios and noise; the measured quantity is
u(t) = sup_{r <= t} max_s mean_p |X(r; x1) - X(r; x2)|^2, compared with the
Bihari envelope v^{-1}(v(C1 |x1 - x2|^2) + C2 int_0^t beta^2).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..bihari import BihariEnvelope
from ..errors import ValidationError
from ..expectation import MonteCarloSetup
from .forward import SdeProblem, euler_all
from .picard import _upper_profile, square_constants


@dataclass
class StabilityReport:
    distance2: float
    u_hat: np.ndarray
    envelope: np.ndarray
    overflow: bool
    c1: float
    c2: float
    fitted_gronwall: float | None
    fitted_c2: float | None

    @property
    def u_T(self) -> float:
        return float(self.u_hat[-1])

    @property
    def margin(self) -> float:
        return float(np.min(self.envelope - self.u_hat))

    @property
    def dominated(self) -> bool:
        return self.margin >= 0.0


def stability_experiment(problem: SdeProblem, x1, x2, setup: MonteCarloSetup, c1: float = 4.0,
                         c2: float | None = None) -> StabilityReport:
    """Compare solutions from x1 and x2; C2 defaults to the computed square constant."""
    coeffs = problem.coefficients
    if coeffs.regime != "H1H2":
        raise ValidationError("the stability envelope uses the square-modulus regime")
    p1, p2 = problem.with_x0(x1), problem.with_x0(x2)
    d2 = float(np.sum((p1.x0 - p2.x0) ** 2))
    diff = euler_all(p1, setup) - euler_all(p2, setup)
    u_hat = np.maximum.accumulate(_upper_profile(diff, 2))
    if c2 is None:
        c2 = square_constants(coeffs, problem.uset, problem.grid.horizon, extra_terms=1)
    times = problem.grid.times
    rho = coeffs.rho
    overflow = False
    if d2 == 0.0:
        env = np.zeros_like(u_hat)
        fitted_g, fitted_c2 = None, None
    elif rho is None:
        env = np.full_like(u_hat, c1 * d2)
        fitted_g, fitted_c2 = float(u_hat[-1] / d2), 0.0
    else:
        benv = BihariEnvelope(rho, beta=c2 * coeffs.beta ** 2)
        vals = [benv.bound(c1 * d2, t) for t in times]
        env = np.array([v for v, _ in vals])
        overflow = any(o for _, o in vals)
        fitted_g = float(u_hat[-1] / d2)
        unit = BihariEnvelope(rho, beta=coeffs.beta ** 2)
        va = unit.v(d2)
        cs = [(unit.v(u) - va) / t for u, t in zip(u_hat[1:], times[1:]) if u > 0]
        fitted_c2 = max([0.0] + cs)
    return StabilityReport(d2, u_hat, env, overflow, c1, float(c2), fitted_g, fitted_c2)


def stability_sweep(problem: SdeProblem, x1, distances, setup: MonteCarloSetup, **kw) -> list[StabilityReport]:
    """Reports for x2 = x1 + delta e_1 over ``distances`` (and delta = 0 first)."""
    x1 = np.atleast_1d(np.asarray(x1, dtype=np.float64))
    out = []
    for delta in [0.0, *distances]:
        x2 = x1.copy()
        x2[0] += delta
        out.append(stability_experiment(problem, x1, x2, setup, **kw))
    return out
