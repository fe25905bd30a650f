"""Desk-scale acceptance criteria, shared by the test suite and ``gsdelab verify``.

Each criterion returns a :class:`CriterionResult` with the measured values,
targets and tolerances it was judged against.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import bihari, moduli
from .coefficients import make_coefficients
from .errors import NumericalAbort
from .expectation import MonteCarloSetup, check_sublinearity, upper_expectation_lattice
from .gheat import gnormal_expectation
from .mollify import brute_force_mollify, mollify
from .paths import SmoothFunction, TimeGrid, ito_formula_residual, simulate_path
from .payoffs import terminal
from .rng import brownian_increments
from .solvers import (BsdeProblem, SdeProblem, bsde_solve, euler_solve, picard_solve_h2, picard_solve_h2p,
                      stability_sweep)
from .uncertainty import ScenarioControl, UncertaintySet, constant_control

SQRT_2_PI = math.sqrt(2.0 / math.pi)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    rows: list = field(default_factory=list)
    runtime: float = 0.0
    runtime_limit: float | None = None
    note: str = ""

    def add(self, label: str, measured, target, tol, ok: bool):
        self.rows.append({"check": label, "measured": measured, "target": target, "tolerance": tol, "ok": bool(ok)})

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        lim = f" (limit {self.runtime_limit:g} s)" if self.runtime_limit else ""
        return f"[{status}] criterion {self.number:2d}: {self.name}  {self.runtime:.2f} s{lim}"


def _finish(res: CriterionResult, t0: float) -> CriterionResult:
    res.runtime = time.perf_counter() - t0
    ok = all(r["ok"] for r in res.rows)
    if res.runtime_limit is not None:
        within = res.runtime < res.runtime_limit
        res.add("runtime [s]", res.runtime, f"< {res.runtime_limit:g}", None, within)
        ok = ok and within
    res.passed = ok
    return res


def _interval():
    return UncertaintySet.from_interval(0.5, 1.0)


def _sq(b):
    return b.b_path[:, -1, 0] ** 2


# 1 --------------------------------------------------------------------------

def criterion_axioms(seed: int = 1) -> CriterionResult:
    t0 = time.perf_counter()
    res = CriterionResult(1, "sublinear-expectation axioms on 27 scenarios x 1e4 paths", False, runtime_limit=5.0)
    uset = UncertaintySet.from_interval(0.5, 1.0, n_interior=1)
    setup = MonteCarloSetup(uset, TimeGrid(1.0, 3), 10_000, seed, control_cap=27)
    res.add("scenarios", len(setup.controls), 27, 0, len(setup.controls) == 27)
    x = setup.estimate(_sq, "B_T^2")
    y = setup.estimate(lambda b: np.sin(3 * b.b_path[:, -1, 0]) + b.b_path[:, 1, 0], "sin(3B_T)+B_t1")
    rep = check_sublinearity(x, y, lam=2.0, c=1.0, tol=1e-12)
    for k, v in rep.slacks.items():
        res.add(f"{k} slack", v, ">= -1e-12", 1e-12, v >= -1e-12)
    rep2 = check_sublinearity(y, x, lam=0.5, c=-3.0, tol=1e-12)
    for k, v in rep2.slacks.items():
        res.add(f"{k} slack (swapped)", v, ">= -1e-12", 1e-12, v >= -1e-12)
    small = MonteCarloSetup(_interval(), TimeGrid(1.0, 1), 10_000, seed + 1, control_cap=2)
    rep3 = check_sublinearity(small.estimate(_sq), small.estimate(lambda b: np.tanh(b.b_path[:, -1, 0])),
                              lam=3.0, c=2.0, tol=1e-12)
    for k, v in rep3.slacks.items():
        res.add(f"{k} slack (2 scenarios)", v, ">= -1e-12", 1e-12, v >= -1e-12)
    return _finish(res, t0)


# 2 / 3 ----------------------------------------------------------------------

def _three_methods(res: CriterionResult, phi: Callable, target: float, label: str, setup: MonteCarloSetup,
                   lattice_rtol: float, pde_atol: float, mc_rule: str):
    uset = setup.uset
    mc = setup.estimate(terminal(phi), label)
    lat = upper_expectation_lattice(phi, uset, TimeGrid(1.0, 200)).value
    pde = gnormal_expectation(uset, phi, t=1.0, n_x=401)
    if mc_rule == "stderr":
        mc_tol = 3 * mc.stderr
        res.add(f"{label} MC stderr", mc.stderr, "< 0.01", 0.01, mc.stderr < 0.01)
    else:
        mc_tol = 0.01 * abs(target)
    lat_tol = lattice_rtol * abs(target)
    res.add(f"{label} MC", mc.value, target, mc_tol, abs(mc.value - target) <= mc_tol)
    res.add(f"{label} lattice", lat, target, lat_tol, abs(lat - target) <= lat_tol)
    res.add(f"{label} PDE", pde, target, pde_atol, abs(pde - target) <= pde_atol)
    vals = {"MC": (mc.value, mc_tol), "lattice": (lat, lat_tol), "PDE": (pde, pde_atol)}
    names = list(vals)
    for i in range(3):
        for j in range(i + 1, 3):
            (a, ta), (b, tb) = vals[names[i]], vals[names[j]]
            res.add(f"{label} {names[i]} vs {names[j]}", abs(a - b), "<= combined tol", ta + tb, abs(a - b) <= ta + tb)


def criterion_gnormal(seed: int = 2) -> CriterionResult:
    t0 = time.perf_counter()
    res = CriterionResult(2, "G-normal extremal values by MC, lattice and PDE", False, runtime_limit=30.0)
    setup = MonteCarloSetup(_interval(), TimeGrid(1.0, 4), 100_000, seed, control_cap=16)
    _three_methods(res, lambda x: x * x, 1.0, "E[B_1^2]", setup, 0.01, 1e-3, "stderr")
    _three_methods(res, lambda x: -x * x, -0.5, "E[-B_1^2]", setup, 0.01, 1e-3, "stderr")
    return _finish(res, t0)


def criterion_abs(seed: int = 3) -> CriterionResult:
    t0 = time.perf_counter()
    res = CriterionResult(3, "convex/concave |x| oracle", False)
    setup = MonteCarloSetup(_interval(), TimeGrid(1.0, 4), 100_000, seed, control_cap=16)
    t1 = SQRT_2_PI * 1.0
    t2 = -SQRT_2_PI * math.sqrt(0.5)
    _three_methods(res, np.abs, t1, "E[|B_1|]", setup, 0.01, 0.01 * abs(t1), "rel")
    _three_methods(res, lambda x: -np.abs(x), t2, "E[-|B_1|]", setup, 0.01, 0.01 * abs(t2), "rel")
    return _finish(res, t0)


# 4 --------------------------------------------------------------------------

def classical_euler(b: Callable, s: Callable, x0: float, seed: int, n_paths: int, n_steps: int,
                    horizon: float) -> np.ndarray:
    """Textbook Euler-Maruyama on the counter-based increments, one scalar at a time."""
    dt = horizon / n_steps
    dw = brownian_increments(seed, n_paths, n_steps, 1, dt)
    out = np.empty((n_paths, n_steps + 1, 1))
    for p in range(n_paths):
        x = float(x0)
        out[p, 0, 0] = x
        for k in range(n_steps):
            t = k * dt
            x = x + (b(t, x) * dt + s(t, x) * float(dw[p, k, 0]))
            out[p, k + 1, 0] = x
    return out


def criterion_singleton(n_seeds: int = 100) -> CriterionResult:
    t0 = time.perf_counter()
    res = CriterionResult(4, "singleton alphabet reduces to classical Euler-Maruyama bitwise", False)
    uset = UncertaintySet([[[1.0]]])
    grid = TimeGrid(1.0, 32)
    prob = SdeProblem(make_coefficients("linear_drift(-1)", "lipschitz_sigma(0.5,1)"), [0.7], grid, uset)
    ctrl = constant_control(uset, 0, grid.n_steps, grid.horizon)
    mismatches = 0
    worst = 0.0
    for seed in range(n_seeds):
        got = euler_solve(prob, ctrl, seed, n_paths=8)
        ref = classical_euler(lambda t, x: -1.0 * x, lambda t, x: 0.5 * x + 1.0, 0.7, seed, 8, grid.n_steps, 1.0)
        if not np.array_equal(got, ref):
            mismatches += 1
            worst = max(worst, float(np.max(np.abs(got - ref))))
    res.add("seeds with any bit difference", mismatches, 0, 0, mismatches == 0)
    res.add("max |difference|", worst, 0.0, 0, worst == 0.0)
    # sigma = 1, b = 0 from x = 0 must reproduce the path simulator exactly
    zero = SdeProblem(make_coefficients("zero", "constant_sigma(1)"), [0.0], grid, uset)
    bund = simulate_path(uset, ctrl, grid, 5, n_paths=8)
    x = euler_solve(zero, ctrl, 5, n_paths=8)
    gap = float(np.max(np.abs(x - bund.b_path)))
    res.add("X = B against the path simulator", gap, 0.0, 0, np.array_equal(x, bund.b_path))
    return _finish(res, t0)


# 5 / 6 ----------------------------------------------------------------------

def criterion_bihari(seed: int = 5) -> CriterionResult:
    t0 = time.perf_counter()
    res = CriterionResult(5, "Bihari engine: Gronwall, rlogr closed form, a = 0", False)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(50):
        beta = bihari.StepFunction.random(rng, horizon=1.0, n_pieces=int(rng.integers(1, 8)), vmax=2.0)
        a = float(rng.uniform(1e-3, 5.0))
        t = float(rng.uniform(0.1, 1.0))
        env = bihari.BihariEnvelope(moduli.linear(1.0), beta=beta)
        exact = a * math.exp(beta.integral(t))
        worst = max(worst, abs(bihari.bihari_bound(env, a, t) - exact) / max(1.0, exact))
    res.add("Gronwall max error (50 step-function beta)", worst, 0.0, 1e-6, worst <= 1e-6)
    env = bihari.BihariEnvelope(moduli.rlogr(), beta=1.0)
    worst = 0.0
    for a in np.concatenate([[1e-6], rng.uniform(1e-6, math.exp(-1.0), 49)]):
        c = float(rng.uniform(0.0, 0.999 * math.log(math.log(1.0 / a))))
        exact = a ** math.exp(-c)
        worst = max(worst, abs(bihari.bihari_bound(env, a, c) - exact))
    res.add("rlogr max error vs a^exp(-int beta)", worst, 0.0, 1e-6, worst <= 1e-6)
    z = bihari.bihari_bound(env, 0.0, 1.0)
    res.add("a = 0", z, 0.0, 0, z == 0.0)
    return _finish(res, t0)


def criterion_osgood() -> CriterionResult:
    t0 = time.perf_counter()
    res = CriterionResult(6, "Osgood classification", False)
    cases = [("linear(1)", moduli.linear(1.0), True), ("linear(5)", moduli.linear(5.0), True),
             ("rlogr", moduli.rlogr(), True), ("rlogr_sqrt", moduli.rlogr_sqrt(), True),
             ("rsqrtlog", moduli.rsqrtlog(), True), ("sqrt", moduli.sqrt_modulus(), False)]
    for name, m, want in cases:
        got = moduli.osgood_test(m)
        res.add(f"osgood({name})", got, want, None, got is want)
    return _finish(res, t0)


# 7 / 8 / 9 --------------------------------------------------------------------

def lipschitz_problem(x0: float = 1.0, n_steps: int = 64) -> SdeProblem:
    return SdeProblem(make_coefficients("linear_drift(-1)", "lipschitz_sigma(0.5,1)"), [x0],
                      TimeGrid(1.0, n_steps), _interval())


def criterion_picard(seed: int = 7) -> CriterionResult:
    t0 = time.perf_counter()
    res = CriterionResult(7, "Picard convergence, Lipschitz benchmark", False, runtime_limit=60.0)
    prob = lipschitz_problem()
    setup = MonteCarloSetup(prob.uset, prob.grid, 10_000, seed, control_cap=8)
    tr = picard_solve_h2(prob, setup, n_iter=12)
    e = np.asarray(tr.errors)
    mono = bool(np.all(np.diff(e[1:]) <= 0))
    res.add("scenarios", len(setup.controls), 8, 0, len(setup.controls) == 8)
    res.add("e_m nonincreasing for m >= 1", mono, True, None, mono)
    ratio = e[10] / e[1]
    res.add("e_10 / e_1", ratio, "< 1e-6", 1e-6, ratio < 1e-6)
    margin = tr.envelope_margin()
    res.add("min(envelope - e_m)", margin, ">= 0", 0, margin >= 0)
    res.add("computed constant C", tr.constants["C"], "reported", None, True)
    res.add("fitted constant C", tr.constants["fitted_C"], "reported", None, True)
    return _finish(res, t0)


def rlogr_problem(x0: float = 0.5, n_steps: int = 64) -> SdeProblem:
    return SdeProblem(make_coefficients("rlogr_drift(1)", "lipschitz_sigma(0.5,1)", regime="H1pH2p"), [x0],
                      TimeGrid(1.0, n_steps), _interval())


def criterion_two_stage(seed: int = 8) -> CriterionResult:
    t0 = time.perf_counter()
    res = CriterionResult(8, "two-stage Picard scheme, log-Lipschitz drift", False)
    prob = rlogr_problem()
    setup = MonteCarloSetup(prob.uset, prob.grid, 2_000, seed, control_cap=4)
    try:
        tr = picard_solve_h2p(prob, setup, n_outer=12, tol=1e-6)
    except NumericalAbort as exc:
        res.add("solver", str(exc), "converges", None, False)
        return _finish(res, t0)
    e = np.asarray(tr.errors)
    below = np.nonzero(e < 1e-4)[0]
    first = int(below[0]) + 1 if below.size else None
    res.add("outer iterations until e_m < 1e-4", first, "<= 12", None, first is not None and first <= 12)
    res.add("outer errors decreasing", bool(np.all(np.diff(e) < 0)), True, None, bool(np.all(np.diff(e) < 0)))
    last = tr.cap_results[-1]["sup_change"]
    res.add("sup change between last two caps", last, "< 1e-4", 1e-4, last is not None and last < 1e-4)
    margin = tr.envelope_margin()
    res.add("min(envelope - e_m)", margin, ">= 0", 0, margin >= 0)
    res.add("Osgood(rho1 + rho3)", tr.constants["osgood_rho1_plus_rho3"], True, None,
            tr.constants["osgood_rho1_plus_rho3"] is True)
    return _finish(res, t0)


def criterion_stability(seed: int = 9) -> CriterionResult:
    t0 = time.perf_counter()
    res = CriterionResult(9, "stability envelope under perturbed initial conditions", False)
    distances = [1e-1, 1e-2, 1e-3]
    for label, b in [("Lipschitz", "linear_drift(-1)"), ("rlogr_sqrt", "rlogr_sqrt_drift(1)")]:
        prob = SdeProblem(make_coefficients(b, "lipschitz_sigma(0.5,1)"), [0.3], TimeGrid(1.0, 64), _interval())
        setup = MonteCarloSetup(prob.uset, prob.grid, 5_000, seed, control_cap=8)
        reps = stability_sweep(prob, [0.3], distances, setup)
        zero = reps[0]
        res.add(f"{label}: u_hat for x1 = x2", float(np.max(np.abs(zero.u_hat))), 0.0, 0, np.all(zero.u_hat == 0.0))
        u_t = [r.u_T for r in reps[1:]]
        shrink = all(a > b for a, b in zip(u_t[:-1], u_t[1:]))
        res.add(f"{label}: u_hat(T) shrinking", u_t, "decreasing", None, shrink)
        for r in reps[1:]:
            res.add(f"{label}: margin at |dx|^2={r.distance2:.0e} (computed C1, C2)", r.margin, ">= 0", 0,
                    r.dominated and not r.overflow)
        # constants fitted at the largest distance must cover the smaller ones
        fit = reps[1]
        env = bihari.BihariEnvelope(prob.coefficients.rho, beta=max(fit.fitted_c2, 0.0) * prob.coefficients.beta ** 2)
        for r in reps[2:]:
            bound = np.array([env.bound(r.distance2, t)[0] for t in prob.grid.times])
            m = float(np.min(bound * (1 + 1e-9) - r.u_hat))
            res.add(f"{label}: margin at |dx|^2={r.distance2:.0e} (C2 fitted at 1e-1)", m, ">= 0", 0, m >= 0)
        res.add(f"{label}: fitted Gronwall constants", [r.fitted_gronwall for r in reps[1:]], "reported", None, True)
    return _finish(res, t0)


# 10 -------------------------------------------------------------------------

def criterion_bsde() -> CriterionResult:
    t0 = time.perf_counter()
    res = CriterionResult(10, "G-BSDE on a 200-step lattice", False, runtime_limit=20.0)
    uset = _interval()
    grid = TimeGrid(1.0, 200)
    r1 = bsde_solve(BsdeProblem(xi=lambda x: x * x, grid=grid, uset=uset))
    res.add("Y_0 for xi = B_T^2", r1.y0, 1.0, 0.02, abs(r1.y0 - 1.0) <= 0.02)
    res.add("stages (f = g = 0)", r1.stages, "<= 3", None, r1.stages <= 3)
    r2 = bsde_solve(BsdeProblem(xi=lambda x: 0.0 * x, grid=grid, uset=uset, f=lambda t, y: np.ones_like(y)))
    dev = max(float(np.max(np.abs(layer - (grid.horizon - t)))) for layer, t in zip(r2.layers, grid.times))
    res.add("max |Y_t - (T - t)| for f = 1", dev, 0.0, 1e-12, dev <= 1e-12)
    res.add("stages (f = 1)", r2.stages, "<= 3", None, r2.stages <= 3)
    r3 = bsde_solve(BsdeProblem(xi=lambda x: x * x, grid=grid, uset=uset, f=lambda t, y: -0.5 * y,
                                g=lambda t, y: 0.2 * np.sin(y), c_growth=0.7, beta_bound=0.0))
    res.add("stages (y-dependent Lipschitz driver)", r3.stages, "reported", None, True)
    return _finish(res, t0)


# 11 -------------------------------------------------------------------------

def criterion_mollifier() -> CriterionResult:
    t0 = time.perf_counter()
    res = CriterionResult(11, "mollifier", False)
    x = np.linspace(-2.0, 2.0, 4001)
    for w in (0.1, 0.01):
        gw = mollify(np.abs, w)
        dev = float(np.max(np.abs(gw(x) - np.abs(x))))
        res.add(f"sup |g_w - g|, g = |x|, w = {w}", dev, f"<= {w}", w, dev <= w)
        xs = x[::100]
        orc = float(np.max(np.abs(gw(xs) - brute_force_mollify(np.abs, w, xs))))
        res.add(f"quadrature vs brute-force convolution, w = {w}", orc, 0.0, 1e-4 * w, orc <= 1e-4 * w)
        slopes = np.abs(np.diff(gw(x)) / np.diff(x))
        bound = gw.lipschitz_bound(float(np.max(np.abs(x))) + w)
        res.add(f"max slope vs predicted Lipschitz bound, w = {w}", float(slopes.max()), f"<= {bound:.4g}", None,
                float(slopes.max()) <= bound)
    gc = mollify(lambda y: np.full_like(y, 2.5), 0.1)
    gl = mollify(lambda y: 3.0 * y - 1.0, 0.1)
    ec = float(np.max(np.abs(gc(x) - 2.5)))
    el = float(np.max(np.abs(gl(x) - (3.0 * x - 1.0))))
    res.add("constant reproduced", ec, 0.0, 1e-12, ec <= 1e-12)
    res.add("linear reproduced", el, 0.0, 1e-12, el <= 1e-12)
    return _finish(res, t0)


# 12 -------------------------------------------------------------------------

def criterion_ito(seed: int = 12, n_paths: int = 1000) -> CriterionResult:
    t0 = time.perf_counter()
    res = CriterionResult(12, "G-Ito residual rate for Phi(x) = x^2", False)
    uset = _interval()
    phi = SmoothFunction(lambda x: x[..., 0] ** 2, lambda x: 2 * x, lambda x: np.full(x.shape[:-1] + (1, 1), 2.0))
    ns = [2 ** k for k in range(6, 13)]
    rms = []
    for n in ns:
        grid = TimeGrid(1.0, n)
        rng = np.random.default_rng([seed, n])
        ctrl = ScenarioControl(1.0, tuple(int(i) for i in rng.integers(0, len(uset), n)))
        b = simulate_path(uset, ctrl, grid, seed, n_paths=n_paths)
        r = ito_formula_residual(b, phi, [0.0])
        rms.append(float(np.sqrt(np.mean(r * r))))
    slope = -float(np.polyfit(np.log(ns), np.log(rms), 1)[0])
    res.add("RMS residuals", rms, "decreasing", None, all(a > b for a, b in zip(rms[:-1], rms[1:])))
    res.add("fitted rate exponent", slope, ">= 0.45 (theory 0.5)", None, slope >= 0.45)
    return _finish(res, t0)


CRITERIA = {
    1: criterion_axioms, 2: criterion_gnormal, 3: criterion_abs, 4: criterion_singleton, 5: criterion_bihari,
    6: criterion_osgood, 7: criterion_picard, 8: criterion_two_stage, 9: criterion_stability, 10: criterion_bsde,
    11: criterion_mollifier, 12: criterion_ito,
}

SUITES = {
    "axioms": [1],
    "oracles": [2, 3, 4, 10, 11, 12],
    "envelopes": [5, 6, 7, 8, 9],
    "all": list(range(1, 13)),
}


def run_suite(name: str, progress: Callable[[CriterionResult], None] | None = None) -> list[CriterionResult]:
    out = []
    for n in SUITES[name]:
        r = CRITERIA[n]()
        out.append(r)
        if progress:
            progress(r)
    return out
