import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gsdelab.errors import ValidationError
from gsdelab.uncertainty import (GFunction, ScenarioControl, UncertaintySet, constant_control,
                                 enumerate_controls, evaluate_g, extreme_index, sigma_bounds)

floats = st.floats(-10, 10, allow_nan=False)


def test_g_scalar_values(interval):
    assert evaluate_g(interval, [[2.0]]) == 1.0
    # sqrt(0.5)**2 carries one ulp of rounding
    assert evaluate_g(interval, [[-2.0]]) == pytest.approx(-0.5, rel=1e-15)
    assert evaluate_g(interval, [[0.0]]) == 0.0


def test_g_rejects_asymmetric():
    u = UncertaintySet([np.eye(2)])
    with pytest.raises(ValidationError):
        evaluate_g(u, [[0.0, 1.0], [0.0, 0.0]])
    with pytest.raises(ValidationError):
        evaluate_g(u, [[1.0]])


def test_g_matches_brute_force_2d():
    rng = np.random.default_rng(0)
    gam = [rng.normal(size=(2, 2)) for _ in range(5)]
    u = UncertaintySet(gam)
    for _ in range(20):
        m = rng.normal(size=(2, 2))
        a = m + m.T
        # independent oracle: explicit trace over the alphabet
        brute = 0.5 * max(np.trace(g @ g.T @ a) for g in gam)
        assert evaluate_g(u, a) == pytest.approx(brute, rel=1e-13, abs=1e-13)


@given(a=floats, b=floats, lam=st.floats(0, 5))
def test_g_sublinear_and_homogeneous(a, b, lam):
    u = UncertaintySet.from_interval(0.3, 1.7, 2)
    g = GFunction(u)
    assert g([[a + b]]) <= g([[a]]) + g([[b]]) + 1e-12
    assert g([[lam * a]]) == pytest.approx(lam * g([[a]]), abs=1e-12)
    if a <= b:
        assert g([[a]]) <= g([[b]]) + 1e-15


@given(beta=floats)
def test_scalar_form_matches_matrix_form(beta):
    u = UncertaintySet.from_interval(0.5, 1.0)
    assert GFunction(u).scalar(beta) == pytest.approx(evaluate_g(u, [[beta]]), abs=1e-14)


def test_sigma_bounds(interval):
    assert sigma_bounds(interval, [1.0]) == pytest.approx((0.5, 1.0), rel=1e-15)
    assert sigma_bounds(interval, [2.0]) == pytest.approx((2.0, 4.0), rel=1e-15)
    assert sigma_bounds(interval, [0.0]) == (0.0, 0.0)


def test_enumerate_exhaustive():
    u = UncertaintySet.from_interval(0.5, 1.0)
    ctrls = enumerate_controls(u, 3, 100)
    assert len(ctrls) == 8
    assert {c.indices for c in ctrls} == set(itertools.product(range(2), repeat=3))


def test_enumerate_capped_contains_constants():
    u = UncertaintySet.from_interval(0.5, 1.0)
    ctrls = enumerate_controls(u, 3, 4)
    idx = [c.indices for c in ctrls]
    assert len(idx) == 4 and len(set(idx)) == 4
    assert (0, 0, 0) in idx and (1, 1, 1) in idx
    assert [c.indices for c in enumerate_controls(u, 3, 4)] == idx


@given(n=st.integers(1, 12))
def test_enumerate_singleton(n):
    u = UncertaintySet([[[1.0]]])
    assert len(enumerate_controls(u, n, 50)) == 1


def test_from_interval_and_bounds():
    u = UncertaintySet.from_interval(0.5, 1.0, 1)
    assert len(u) == 3
    assert u.variance_bounds == pytest.approx((0.5, 1.0), rel=1e-15)
    assert UncertaintySet.from_interval(0.7, 0.7).variance_bounds == pytest.approx((0.7, 0.7))
    with pytest.raises(ValidationError):
        UncertaintySet.from_interval(1.0, 0.5)


def test_bad_sets_rejected():
    with pytest.raises(ValidationError):
        UncertaintySet([])
    with pytest.raises(ValidationError):
        UncertaintySet([np.eye(2), np.eye(3)])
    with pytest.raises(ValidationError):
        UncertaintySet([[[np.nan]]])


def test_control_helpers(interval):
    c = ScenarioControl(1.0, (1, 1, 1, 0, 0))
    assert c.run_length() == "1x3,0x2"
    assert not c.is_constant()
    assert constant_control(interval, 1, 4).is_constant()
    assert extreme_index(interval, "max") == 1 and extreme_index(interval, "min") == 0
    with pytest.raises(ValidationError):
        ScenarioControl(1.0, (2,)).validate(interval)
    with pytest.raises(ValidationError):
        ScenarioControl(1.0, (), mode="feedback")
