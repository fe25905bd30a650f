import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import gaussian_expectation
from gsdelab.expectation import upper_expectation_lattice
from gsdelab.paths import TimeGrid
from gsdelab.errors import CFLError, ValidationError
from gsdelab.gheat import PdeConfig, cfl_steps, gnormal_expectation, solve_gheat
from gsdelab.payoffs import payoff
from gsdelab.uncertainty import UncertaintySet


def _cfg(n_x=201, L=8.0, t=1.0, **kw):
    dx = 2 * L / (n_x - 1)
    return PdeConfig(L, n_x, cfl_steps(t, dx, 1.0), 0.5, 1.0, **kw)


def test_constant_and_linear_preserved():
    cfg = _cfg()
    np.testing.assert_array_equal(solve_gheat(cfg, lambda x: np.full_like(x, 3.0), 1.0), 3.0)
    u = solve_gheat(cfg, lambda x: x, 1.0)
    np.testing.assert_allclose(u, cfg.x, atol=1e-12)


@pytest.mark.parametrize("name,var,tol", [("square", 1.0, 1e-3), ("neg_square", 0.5, 1e-3), ("abs", 1.0, 2e-3)])
def test_gnormal_values(interval, name, var, tol):
    phi = payoff(name)
    assert gnormal_expectation(interval, phi, n_x=401, half_width=8.0) == pytest.approx(
        gaussian_expectation(phi, var), abs=tol)


def test_odd_bounded_is_symmetric(interval):
    # G is not odd, so an odd non-convex phi has a strictly positive value;
    # the scheme's symmetry shows up as E[phi] = E[-phi]
    up = gnormal_expectation(interval, np.tanh)
    down = gnormal_expectation(interval, lambda x: -np.tanh(x))
    assert up == pytest.approx(down, abs=1e-14)
    assert up > 0
    lat = upper_expectation_lattice(np.tanh, interval, TimeGrid(1.0, 400)).value
    assert up == pytest.approx(lat, abs=1e-4)


def test_cfl_violation_rejected():
    with pytest.raises(CFLError):
        solve_gheat(PdeConfig(8.0, 401, 10, 0.5, 1.0), np.abs, 1.0)


def test_bad_boundary():
    with pytest.raises(ValidationError):
        PdeConfig(8.0, 401, 10, 0.5, 1.0, boundary="periodic")


@given(c=st.floats(-3, 3), lam=st.floats(0, 3))
def test_scheme_monotone_and_homogeneous(c, lam):
    cfg = _cfg(n_x=81, L=4.0, t=0.5)
    phi = lambda x: np.abs(x - 0.3)
    u = solve_gheat(cfg, phi, 0.5)
    # monotone: phi <= phi + (x-c)^2 pointwise gives u <= u'
    u2 = solve_gheat(cfg, lambda x: phi(x) + 0.1 * (x - c) ** 2, 0.5)
    assert np.all(u <= u2 + 1e-12)
    ul = solve_gheat(cfg, lambda x: lam * phi(x), 0.5)
    np.testing.assert_allclose(ul, lam * u, rtol=1e-12, atol=1e-12)


def test_reflecting_boundary_runs():
    cfg = _cfg(boundary="clamped")
    u = solve_gheat(cfg, lambda x: np.exp(-x * x), 1.0)
    assert u.max() <= 1.0 and u.min() >= 0.0
