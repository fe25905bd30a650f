"""Picard iterations for forward G-SDEs on a fixed noise sample.

All iterates live on the same (scenario, path, node) array as the Euler
scheme.  X^{m+1} is the cumulative sum of [x, increments(X^m)], so the
discrete fixed point is exactly the Euler solution.

Errors are measured with the upper expectation over the scenario set:
``u_m(t_k) = max_s mean_p |X^{m+1} - X^m|^q`` and e_m = sup_k u_m(t_k), with
q = 2 in the square-modulus regime and q = 1 in the two-stage regime; both
are recorded in every run.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..bihari import BihariEnvelope, iterated_envelope
from ..coefficients import CoefficientSet, truncate_coefficients
from ..errors import MemoryBudgetError, NumericalAbort, ValidationError
from ..expectation import MonteCarloSetup
from .forward import SdeProblem, increments, scenario_noise

DEFAULT_BUDGET = 2 * 1024 ** 3
DIVERGENCE_FACTOR = 1e3
CAP_SCHEDULE = (4.0, 16.0, 64.0, 256.0)


@dataclass
class PicardTrace:
    metric: str
    errors: list = field(default_factory=list)
    errors_sq: list = field(default_factory=list)
    errors_abs: list = field(default_factory=list)
    profiles: list = field(default_factory=list)
    envelope: np.ndarray | None = None
    constants: dict = field(default_factory=dict)
    converged: bool = False
    solution: np.ndarray | None = None
    iterates: list | None = None
    inner_counts: list = field(default_factory=list)
    cap_results: list = field(default_factory=list)

    @property
    def envelope_sup(self) -> np.ndarray | None:
        return None if self.envelope is None else self.envelope[:, -1]

    def envelope_margin(self) -> float | None:
        """min_m (envelope_m - e_m); >= 0 means the trace is dominated."""
        if self.envelope is None:
            return None
        e = np.asarray(self.errors)
        return float(np.min(self.envelope_sup[: e.size] - e))

    def fitted_ratio(self, burn_in: int = 1) -> float:
        """Geometric-mean contraction ratio e_{m+1}/e_m over the recorded trace."""
        e = np.asarray(self.errors[burn_in:])
        e = e[e > 0]
        if e.size < 2:
            return 0.0
        return float(np.exp(np.mean(np.diff(np.log(e)))))


def check_memory(setup: MonteCarloSetup, n: int, arrays: int, budget: int) -> None:
    need = len(setup.controls) * setup.n_paths * (setup.grid.n_steps + 1) * n * 8 * arrays
    if need > budget:
        raise MemoryBudgetError(
            f"iterate storage needs {need / 2**20:.1f} MiB, budget is {budget / 2**20:.1f} MiB; "
            "reduce n_paths, scenarios or steps")


def _upper_profile(diff: np.ndarray, power: int) -> np.ndarray:
    """max over scenarios of path means of |diff|^power, per node: (N + 1,)."""
    nrm = np.sqrt(np.sum(diff * diff, axis=-1)) if diff.shape[-1] > 1 else np.abs(diff[..., 0])
    val = nrm * nrm if power == 2 else nrm
    return val.mean(axis=1).max(axis=0)


def _alphabet_stats(uset):
    sig = uset.sigma_stack
    s_bar = float(max(np.linalg.eigvalsh(s).max() for s in sig))
    q2 = float(max(np.sum(s * s) for s in sig))
    q1 = float(max(np.sum(np.abs(s)) for s in sig))
    return s_bar, q2, q1


def square_constants(coeffs: CoefficientSet, uset, horizon: float, extra_terms: int = 0) -> float:
    """C with |sum of Euler increment differences|^2 <= C sum(|db|^2 + |dh|^2 + |dsigma|^2) dt
    in upper expectation: Cauchy-Schwarz for the dt and d<B> sums, the
    isometry for the dB sum, and (a_1 + ... + a_m)^2 <= m sum a_i^2."""
    s_bar, q2, _ = _alphabet_stats(uset)
    parts = []
    if not coeffs.b.is_zero:
        parts.append(horizon)
    if coeffs.has_h:
        parts.append(q2 * horizon)
    if any(not s.is_zero for s in coeffs.sigma):
        parts.append(s_bar)
    if not parts:
        return 0.0
    return (len(parts) + extra_terms) * max(parts)


def first_moment_constants(coeffs: CoefficientSet, uset) -> tuple[float, float]:
    """(c1, c3) for E|dX^{m+1}|(t) <= int beta (c1 rho1(E|dX^m|) + c3 rho3(E|dX^{m+1}|)).

    c1 collects the dt and d<B> integrals; c3 = s_bar / 2 comes from the
    second derivative of |x|, whose operator norm is at most 1/|x|.
    """
    s_bar, _, q1 = _alphabet_stats(uset)
    c1 = 1.0 + (q1 if coeffs.has_h else 0.0)
    return c1, 0.5 * s_bar


def _next_iterate(x0, incs):
    out = np.empty(incs.shape[:-2] + (incs.shape[-2] + 1, incs.shape[-1]))
    out[..., 0, :] = x0
    out[..., 1:, :] = incs
    return np.cumsum(out, axis=-2, out=out)


def _all_increments(coeffs, setup, db, dqv, x, **kw):
    t = setup.grid.times[:-1][:, None]
    return np.stack([increments(coeffs, t, x[s, :, :-1, :], db[s], dqv[s], setup.grid.dt, **kw)
                     for s in range(x.shape[0])])


def _check_finite(x, stage):
    if not np.all(np.isfinite(x)):
        idx = np.argwhere(~np.isfinite(x))[0]
        raise NumericalAbort(f"non-finite iterate at index {idx.tolist()}", stage=stage,
                             diagnostics={"index": idx.tolist()})


def picard_solve_h2(problem: SdeProblem, setup: MonteCarloSetup, n_iter: int = 20, tol: float = 0.0,
                    keep_iterates: bool = False, memory_budget: int = DEFAULT_BUDGET,
                    envelope: bool = True) -> PicardTrace:
    """Picard iteration X^{m+1} = x + sum [b(X^m) dt + h(X^m) d<B> + sigma(X^m) dB].

    X^0 = x.  Stops after ``n_iter`` iterates or when e_m < ``tol``.  Aborts
    if e_m > 1e3 e_0.  The trace carries the discrete iterated envelope
    E_{m+1}(t_k) = C sum_{i<k} beta^2 rho(E_m(t_i)) dt with C from
    :func:`square_constants` and E_0 the measured profile of m = 0.
    """
    coeffs = problem.coefficients
    if coeffs.regime != "H1H2":
        raise ValidationError("picard_solve_h2 needs a coefficient set in regime H1H2")
    _check_setup(problem, setup)
    check_memory(setup, coeffs.n, 4 + (n_iter if keep_iterates else 0), memory_budget)
    db, dqv = scenario_noise(setup)
    shape = (len(setup.controls), setup.n_paths, setup.grid.n_steps + 1, coeffs.n)
    x = np.broadcast_to(problem.x0, shape).copy()
    trace = PicardTrace(metric="second_moment", iterates=[x] if keep_iterates else None)
    for m in range(n_iter):
        nxt = _next_iterate(problem.x0, _all_increments(coeffs, setup, db, dqv, x))
        _check_finite(nxt, f"picard iteration {m}")
        diff = nxt - x
        prof2 = _upper_profile(diff, 2)
        trace.profiles.append(prof2)
        trace.errors_sq.append(float(prof2.max()))
        trace.errors_abs.append(float(_upper_profile(diff, 1).max()))
        trace.errors.append(trace.errors_sq[-1])
        x = nxt
        if keep_iterates:
            trace.iterates.append(x)
        e0 = trace.errors[0]
        if e0 > 0 and trace.errors[-1] > DIVERGENCE_FACTOR * e0:
            raise NumericalAbort(f"Picard errors grew beyond {DIVERGENCE_FACTOR:g} e_0", stage=f"picard iteration {m}",
                                 diagnostics={"errors": list(trace.errors)})
        if trace.errors[-1] < tol or trace.errors[-1] == 0.0:
            trace.converged = True
            break
    trace.solution = x
    c = square_constants(coeffs, problem.uset, problem.grid.horizon)
    trace.constants = {"C": c, "beta2": coeffs.beta ** 2, "fitted_C": _fitted_square_constant(trace, coeffs, problem)}
    rho = coeffs.rho
    if envelope:
        if rho is None:
            trace.envelope = np.zeros((len(trace.errors), shape[2]))
            trace.envelope[0] = np.maximum.accumulate(trace.profiles[0])
        else:
            trace.envelope = iterated_envelope(rho, c, coeffs.beta ** 2, problem.grid.times,
                                               trace.profiles[0], len(trace.errors))
    return trace


def _fitted_square_constant(trace, coeffs, problem) -> float | None:
    """Smallest C with u_{m+1}(t_k) <= C sum_{i<k} beta^2 rho(u_m(t_i)) dt on the recorded trace."""
    rho = coeffs.rho
    if rho is None or len(trace.profiles) < 2:
        return None
    dt = problem.grid.dt
    best = 0.0
    for prev, cur in zip(trace.profiles[:-1], trace.profiles[1:]):
        denom = np.zeros_like(prev)
        denom[1:] = np.cumsum(coeffs.beta ** 2 * np.asarray(rho(np.maximum(prev[:-1], 1e-300))) * dt)
        ok = denom > 1e-300
        if np.any(ok):
            best = max(best, float(np.max(cur[ok] / denom[ok])))
    return best


def _check_setup(problem, setup):
    if setup.grid != problem.grid:
        raise ValidationError("Monte Carlo setup grid differs from the problem grid")
    if setup.uset.dim != problem.uset.dim:
        raise ValidationError("Monte Carlo setup uses a different uncertainty set")


def _two_stage(coeffs, problem, setup, db, dqv, n_outer, n_inner, tol, inner_tol, keep_iterates):
    shape = (len(setup.controls), setup.n_paths, setup.grid.n_steps + 1, coeffs.n)
    x = np.broadcast_to(problem.x0, shape).copy()
    trace = PicardTrace(metric="first_moment", iterates=[x] if keep_iterates else None)
    has_sigma = any(not s.is_zero for s in coeffs.sigma)
    for m in range(n_outer):
        drift = _all_increments(coeffs, setup, db, dqv, x, drift_only=True)
        y = x
        inner_err = []
        for j in range(n_inner):
            incs = drift + _all_increments(coeffs, setup, db, dqv, y, diffusion_only=True) if has_sigma else drift
            y_new = _next_iterate(problem.x0, incs)
            _check_finite(y_new, f"outer {m} inner {j}")
            err = float(_upper_profile(y_new - y, 1).max())
            inner_err.append(err)
            y = y_new
            if err <= inner_tol or not has_sigma:
                break
        else:
            raise NumericalAbort(f"inner Picard loop did not reach {inner_tol:g} in {n_inner} iterations",
                                 stage=f"outer iteration {m}", diagnostics={"inner_errors": inner_err,
                                                                            "outer_errors": list(trace.errors)})
        trace.inner_counts.append(len(inner_err))
        diff = y - x
        prof1 = _upper_profile(diff, 1)
        trace.profiles.append(prof1)
        trace.errors_abs.append(float(prof1.max()))
        trace.errors_sq.append(float(_upper_profile(diff, 2).max()))
        trace.errors.append(trace.errors_abs[-1])
        x = y
        if keep_iterates:
            trace.iterates.append(x)
        e0 = trace.errors[0]
        if e0 > 0 and trace.errors[-1] > DIVERGENCE_FACTOR * e0:
            raise NumericalAbort(f"outer errors grew beyond {DIVERGENCE_FACTOR:g} e_0", stage=f"outer iteration {m}",
                                 diagnostics={"errors": list(trace.errors)})
        if trace.errors[-1] < tol:
            trace.converged = True
            break
    trace.solution = x
    return trace


def first_moment_envelope(coeffs: CoefficientSet, problem: SdeProblem, e0_profile, n_iter: int) -> np.ndarray:
    """Envelopes E_m for the two-stage scheme.

    E_{m+1}(t) = v3^{-1}(v3(a(t)) + c3 int_0^t beta) with the nondecreasing
    a(t) = c1 sum_{i<k} beta rho1(E_m(t_i)) dt (Bihari bound for the rho3
    part), and E_0 the measured profile.
    """
    c1, c3 = first_moment_constants(coeffs, problem.uset)
    times = problem.grid.times
    dt = problem.grid.dt
    beta = coeffs.beta
    rho1, rho3 = coeffs.rho1, coeffs.rho3
    env3 = BihariEnvelope(rho3, beta=c3 * beta) if rho3 is not None else None
    out = np.empty((n_iter, times.size))
    cur = np.maximum.accumulate(np.asarray(e0_profile, dtype=np.float64))
    for m in range(n_iter):
        out[m] = cur
        a = np.zeros_like(cur)
        if rho1 is not None:
            r1 = np.where(cur[:-1] > 0, np.asarray(rho1(np.maximum(cur[:-1], 1e-300))), 0.0)
            a[1:] = np.cumsum(c1 * beta * r1 * dt)
        if env3 is None:
            cur = a
        else:
            cur = np.array([env3.bound(ak, t)[0] for ak, t in zip(a, times)])
    return out


def picard_solve_h2p(problem: SdeProblem, setup: MonteCarloSetup, n_outer: int = 12, n_inner: int | None = None,
                     tol: float = 1e-6, caps=CAP_SCHEDULE, keep_iterates: bool = False,
                     memory_budget: int = DEFAULT_BUDGET, envelope: bool = True) -> PicardTrace:
    """Two-stage Picard scheme: b, h frozen at X^m, sigma implicit in X^{m+1}.

    Each stage equation is solved by an inner Picard loop in the sigma
    argument with tolerance ``tol / 10``.  The whole scheme runs for every
    truncation cap N in ``caps`` (scaled by max(1, |x|)); the returned trace
    is the one for the largest cap and ``cap_results`` holds, per cap, the
    outer error sequence and the sup / first-moment difference from the
    previous cap.  ``caps=None`` runs once without truncation.
    """
    coeffs = problem.coefficients
    if coeffs.regime != "H1pH2p":
        raise ValidationError("picard_solve_h2p needs a coefficient set in regime H1pH2p")
    _check_setup(problem, setup)
    check_memory(setup, coeffs.n, 6 + (n_outer if keep_iterates else 0), memory_budget)
    n_inner = n_inner or (setup.grid.n_steps + 2)
    db, dqv = scenario_noise(setup)
    scale = max(1.0, float(np.max(np.abs(problem.x0))))
    runs = [None] if caps is None else [c * scale for c in caps]
    trace, prev = None, None
    cap_results = []
    for cap in runs:
        cset = coeffs if cap is None else truncate_coefficients(coeffs, cap)
        trace = _two_stage(cset, problem, setup, db, dqv, n_outer, n_inner, tol, tol / 10.0, keep_iterates)
        row = {"cap": cap, "errors": list(trace.errors), "converged": trace.converged,
               "sup_change": None, "mean_change": None}
        if prev is not None:
            d = trace.solution - prev
            row["sup_change"] = float(np.max(np.abs(d)))
            row["mean_change"] = float(_upper_profile(d, 1).max())
        cap_results.append(row)
        prev = trace.solution
    trace.cap_results = cap_results
    c1, c3 = first_moment_constants(coeffs, problem.uset)
    trace.constants = {"c1": c1, "c3": c3, "beta": coeffs.beta,
                       "osgood_rho1_plus_rho3": None if coeffs.rho13 is None else coeffs.rho13.osgood}
    if envelope:
        trace.envelope = first_moment_envelope(coeffs, problem, trace.profiles[0], len(trace.errors))
    return trace


def self_consistency(problem: SdeProblem, setup: MonteCarloSetup, x: np.ndarray) -> float:
    """max |x - (x0 + cumsum increments(x))| over all nodes, paths and scenarios."""
    db, dqv = scenario_noise(setup)
    nxt = _next_iterate(problem.x0, _all_increments(problem.coefficients, setup, db, dqv, x))
    return float(np.max(np.abs(nxt - x)))
