import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gsdelab.acceptance import classical_euler, lipschitz_problem, rlogr_problem
from gsdelab.coefficients import make_coefficients
from gsdelab.errors import MemoryBudgetError, NumericalAbort, ValidationError
from gsdelab.expectation import MonteCarloSetup
from gsdelab.paths import TimeGrid, simulate_path
from gsdelab.solvers import (BsdeProblem, SdeProblem, bsde_solve, euler_all, euler_solve, picard_solve_h2,
                             picard_solve_h2p, stability_experiment, stability_sweep)
from gsdelab.solvers.picard import self_consistency
from gsdelab.coefficients import Term, CoefficientSet, constant_sigma
from gsdelab.uncertainty import UncertaintySet, constant_control

SINGLE = UncertaintySet([[[1.0]]])
INTERVAL = UncertaintySet.from_interval(0.5, 1.0)


# -- forward Euler --------------------------------------------------------------

def test_zero_coefficients_stay_put():
    p = SdeProblem(make_coefficients("zero", "constant_sigma(0)"), [1.5], TimeGrid(1.0, 8), INTERVAL)
    setup = MonteCarloSetup(INTERVAL, p.grid, 50, seed=1, control_cap=4)
    assert np.all(euler_all(p, setup) == 1.5)


@given(seed=st.integers(0, 2 ** 40))
def test_brownian_shift_bitwise(seed):
    g = TimeGrid(1.0, 16)
    p = SdeProblem(make_coefficients("zero", "constant_sigma(1)"), [0.0], g, SINGLE)
    x = euler_solve(p, constant_control(SINGLE, 0, 16), seed, n_paths=4)
    b = simulate_path(SINGLE, constant_control(SINGLE, 0, 16), g, seed, n_paths=4)
    np.testing.assert_array_equal(x[..., 0], b.b_path[..., 0])


@given(seed=st.integers(0, 2 ** 40))
def test_singleton_matches_classical_oracle(seed):
    p = lipschitz_problem(n_steps=20)
    p = SdeProblem(p.coefficients, p.x0, p.grid, SINGLE)
    x = euler_solve(p, constant_control(SINGLE, 0, 20), seed, n_paths=6)
    ref = classical_euler(lambda t, v: -v, lambda t, v: 0.5 * v + 1.0, 1.0, seed, 6, 20, 1.0)
    np.testing.assert_array_equal(x, ref)


def test_decay_ode_first_order():
    errs = []
    for n in (16, 32, 64, 128):
        p = SdeProblem(make_coefficients("linear_drift(-1)", "constant_sigma(0)"), [2.0], TimeGrid(1.0, n), SINGLE)
        xt = euler_solve(p, constant_control(SINGLE, 0, n), 0)[0, -1, 0]
        assert xt == pytest.approx(2.0 * (1 - 1 / n) ** n, rel=1e-13)
        errs.append(abs(xt - 2.0 * math.exp(-1.0)))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(rates - 1.0) < 0.1)


def test_nan_aborts_with_location():
    blow = Term(lambda t, x: np.where(x > 1.2, np.nan, 1.0 + 0 * x), "blow", growth=(1.0, 0.0))
    p = SdeProblem(CoefficientSet(1, blow, (constant_sigma(0.0),)), [1.0], TimeGrid(1.0, 10), SINGLE)
    with pytest.raises(NumericalAbort) as ei:
        euler_solve(p, constant_control(SINGLE, 0, 10), 0)
    assert "t" in str(ei.value)


def test_shape_validation():
    with pytest.raises(ValidationError):
        SdeProblem(make_coefficients("zero", "constant_sigma(1)"), [0.0, 1.0], TimeGrid(1.0, 4), SINGLE)
    with pytest.raises(ValidationError):
        SdeProblem(make_coefficients("zero", "constant_sigma(1)"), [0.0], TimeGrid(1.0, 4),
                   UncertaintySet([np.eye(2)]))


# -- Picard, square regime ----------------------------------------------------------

@pytest.fixture(scope="module")
def lipschitz_trace():
    p = lipschitz_problem(n_steps=32)
    setup = MonteCarloSetup(p.uset, p.grid, 2000, seed=3, control_cap=8)
    return p, setup, picard_solve_h2(p, setup, n_iter=12, keep_iterates=True)


def test_picard_zero_problem():
    p = SdeProblem(make_coefficients("zero", "constant_sigma(0)"), [0.7], TimeGrid(1.0, 8), INTERVAL)
    setup = MonteCarloSetup(INTERVAL, p.grid, 20, seed=1, control_cap=4)
    tr = picard_solve_h2(p, setup, n_iter=5, keep_iterates=True)
    assert tr.errors == [0.0] and tr.converged
    assert np.all(tr.iterates[1] == 0.7)


def test_picard_geometric_decay(lipschitz_trace):
    _, _, tr = lipschitz_trace
    e = np.asarray(tr.errors)
    assert np.all(np.diff(e[1:]) <= 0)
    assert tr.fitted_ratio() < 1
    assert e[10] < 1e-6 * e[1]


def test_picard_under_envelope(lipschitz_trace):
    _, _, tr = lipschitz_trace
    assert tr.envelope_margin() >= 0
    assert tr.constants["fitted_C"] <= tr.constants["C"]


def test_picard_fixed_point_is_euler(lipschitz_trace):
    p, setup, tr = lipschitz_trace
    x = euler_all(p, setup)
    # the Euler path is an exact fixed point of the discrete Picard map
    assert self_consistency(p, setup, x) == 0.0
    # iterate m agrees with Euler on the first m steps, bitwise
    for m in (1, 3, 6):
        np.testing.assert_array_equal(tr.iterates[m][:, :, : m + 1], x[:, :, : m + 1])


def test_picard_rlogr_square_form_under_envelope():
    coeffs = make_coefficients("rlogr_sqrt_drift(1)", "lipschitz_sigma(0.5,1)")
    p = SdeProblem(coeffs, [0.3], TimeGrid(1.0, 32), INTERVAL)
    setup = MonteCarloSetup(INTERVAL, p.grid, 2000, seed=5, control_cap=8)
    tr = picard_solve_h2(p, setup, n_iter=10)
    assert tr.envelope_margin() >= 0
    assert tr.errors[-1] < tr.errors[0]


def test_picard_memory_budget_and_regime():
    p = lipschitz_problem(n_steps=16)
    setup = MonteCarloSetup(p.uset, p.grid, 500, seed=1, control_cap=4)
    with pytest.raises(MemoryBudgetError):
        picard_solve_h2(p, setup, memory_budget=1000)
    with pytest.raises(ValidationError):
        picard_solve_h2p(p, setup)
    with pytest.raises(ValidationError):
        picard_solve_h2(rlogr_problem(n_steps=16), setup)


# -- two-stage scheme ---------------------------------------------------------------

def test_two_stage_decouples_without_drift():
    coeffs = make_coefficients("zero", "lipschitz_sigma(0.5,1)")
    p2 = SdeProblem(coeffs, [0.5], TimeGrid(1.0, 16), INTERVAL)
    pp = SdeProblem(make_coefficients("zero", "lipschitz_sigma(0.5,1)", regime="H1pH2p"), [0.5], p2.grid, INTERVAL)
    setup = MonteCarloSetup(INTERVAL, p2.grid, 1000, seed=4, control_cap=8)
    ref = picard_solve_h2(p2, setup, n_iter=40, tol=1e-28)
    tr = picard_solve_h2p(pp, setup, n_outer=5, tol=1e-8, caps=None)
    assert tr.inner_counts[0] > 1
    assert tr.errors[1] < 1e-8  # the second outer pass sees no change
    assert np.max(np.abs(tr.solution - ref.solution)) < 1e-9


@pytest.fixture(scope="module")
def rlogr_trace():
    p = rlogr_problem(n_steps=32)
    setup = MonteCarloSetup(p.uset, p.grid, 1000, seed=8, control_cap=4)
    return p, setup, picard_solve_h2p(p, setup, n_outer=12, tol=1e-6)


def test_two_stage_converges_under_envelope(rlogr_trace):
    _, _, tr = rlogr_trace
    e = np.asarray(tr.errors)
    assert e[-1] < 1e-4
    assert np.all(np.diff(e[1:]) <= 0)
    assert tr.envelope_margin() >= 0


def test_cap_escalation(rlogr_trace):
    _, _, tr = rlogr_trace
    changes = [r["sup_change"] for r in tr.cap_results[1:]]
    assert changes[0] > 0  # the smallest cap clips
    assert changes[-1] < 1e-4
    assert all(a >= b for a, b in zip(changes, changes[1:]))


# -- stability -----------------------------------------------------------------------

def test_stability_identical_start():
    p = lipschitz_problem(n_steps=16)
    setup = MonteCarloSetup(p.uset, p.grid, 500, seed=2, control_cap=4)
    rep = stability_experiment(p, [1.0], [1.0], setup)
    assert np.all(rep.u_hat == 0.0)


def test_stability_lipschitz_gronwall_fit():
    p = lipschitz_problem(n_steps=32)
    setup = MonteCarloSetup(p.uset, p.grid, 2000, seed=9, control_cap=8)
    reps = stability_sweep(p, [1.0], [1e-1, 1e-2, 1e-3], setup)
    u = [r.u_T for r in reps[1:]]
    assert u[0] > u[1] > u[2] > 0
    fits = [r.fitted_gronwall for r in reps[1:]]
    assert max(fits) / min(fits) < 1.05
    assert all(r.dominated for r in reps)


def test_stability_rlogr_bound():
    coeffs = make_coefficients("rlogr_sqrt_drift(1)", "lipschitz_sigma(0.5,1)")
    p = SdeProblem(coeffs, [0.3], TimeGrid(1.0, 32), INTERVAL)
    setup = MonteCarloSetup(INTERVAL, p.grid, 2000, seed=6, control_cap=8)
    for rep in stability_sweep(p, [0.3], [1e-1, 1e-2, 1e-3], setup)[1:]:
        assert rep.dominated and not rep.overflow


# -- G-BSDE ------------------------------------------------------------------------

def test_bsde_constant_terminal():
    r = bsde_solve(BsdeProblem(lambda x: np.full_like(x, 2.0), TimeGrid(1.0, 30), INTERVAL))
    assert all(np.all(v == 2.0) for v in r.layers)


def test_bsde_deterministic_driver():
    g = TimeGrid(1.0, 50)
    r = bsde_solve(BsdeProblem(lambda x: 0 * x, g, INTERVAL, f=lambda t, y: np.ones_like(y)))
    for k, v in enumerate(r.layers):
        np.testing.assert_allclose(v, 1.0 - g.times[k], rtol=0, atol=1e-12)
    assert r.stages <= 3


def test_bsde_square_terminal():
    g = TimeGrid(1.0, 200)
    r = bsde_solve(BsdeProblem(lambda x: x * x, g, INTERVAL))
    assert r.y0 == pytest.approx(1.0, rel=0.02)
    # convexity: Y_t = B_t^2 + sigma_max^2 (T - t) on the lattice nodes
    k = 100
    np.testing.assert_allclose(r.layers[k], r.lattice.states(k) ** 2 + (1.0 - g.times[k]), rtol=1e-9, atol=1e-9)


def test_bsde_lipschitz_driver_converges():
    p = BsdeProblem(np.abs, TimeGrid(1.0, 40), INTERVAL, f=lambda t, y: 0.5 * np.sin(y), g=lambda t, y: 0.2 * y,
                    c_growth=0.7)
    r = bsde_solve(p)
    assert r.converged
    assert all(a >= b for a, b in zip(r.errors[1:], r.errors[2:]))


def test_bsde_validation():
    with pytest.raises(ValidationError):
        BsdeProblem(np.abs, TimeGrid(1.0, 4), INTERVAL, f=lambda t, y: y ** 2, c_growth=1.0)
    with pytest.raises(ValidationError):
        BsdeProblem(np.abs, TimeGrid(1.0, 4), UncertaintySet([np.eye(2)]))
    with pytest.raises(NumericalAbort):
        bsde_solve(BsdeProblem(np.abs, TimeGrid(1.0, 4), INTERVAL, f=lambda t, y: 3 * y), n_iter=2)
