import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gsdelab.errors import ValidationError
from gsdelab.paths import (SmoothFunction, TimeGrid, directional_qv, export_csv, ito_formula_residual, ito_integral,
                           mg_norm, qv_integral, simulate_path)
from gsdelab.uncertainty import ScenarioControl, UncertaintySet, constant_control, enumerate_controls

square = SmoothFunction(lambda x: x[..., 0] ** 2, lambda x: 2 * x, lambda x: 2 * np.ones(x.shape + (1,)))


def test_singleton_qv_equals_time(singleton):
    g = TimeGrid(1.0, 10)
    b = simulate_path(singleton, constant_control(singleton, 0, 10), g, seed=3, n_paths=5)
    np.testing.assert_array_equal(b.qv_path[:, 0, 0], np.cumsum(np.r_[0, np.full(10, 0.1)]))
    assert b.b_path[:, 0].max() == 0.0


def test_constant_scenario_qv(interval):
    g = TimeGrid(2.0, 8)
    b = simulate_path(interval, constant_control(interval, 1, 8, 2.0), g, seed=1)
    assert b.qv_path[-1, 0, 0] == 2.0


@given(seed=st.integers(0, 10 ** 9), idx=st.lists(st.integers(0, 2), min_size=6, max_size=6))
def test_qv_increments_in_band(seed, idx):
    u = UncertaintySet.from_interval(0.5, 1.0, 1)
    g = TimeGrid(1.0, 6)
    b = simulate_path(u, ScenarioControl(1.0, tuple(idx)), g, seed, n_paths=2)
    rate = b.dqv[:, 0, 0] / g.dt
    assert np.all(rate >= 0.5 - 1e-15) and np.all(rate <= 1.0 + 1e-15)


def test_ito_integral_trivial(interval):
    g = TimeGrid(1.0, 12)
    b = simulate_path(interval, enumerate_controls(interval, 12, 3, seed=2)[2], g, seed=4, n_paths=7)
    np.testing.assert_allclose(ito_integral(1.0, b, [1.0]), b.b_path[:, -1, 0], rtol=1e-13, atol=1e-14)
    assert np.all(ito_integral(0.0, b, [1.0]) == 0.0)


def test_ito_integral_converges_to_identity(singleton):
    # exact identity B_T^2 = 2 int B dB + <B>_T; discretisation error O(dt) in mean square
    errs = []
    for n in (16, 64, 256):
        g = TimeGrid(1.0, n)
        b = simulate_path(singleton, constant_control(singleton, 0, n), g, seed=5, n_paths=2000)
        lhs = ito_integral(b.b_path[:, :, 0], b, [1.0])
        rhs = 0.5 * (b.b_path[:, -1, 0] ** 2 - b.qv_path[-1, 0, 0])
        errs.append(np.mean((lhs - rhs) ** 2))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] == pytest.approx(0.5 / 256, rel=0.2)


def test_qv_integral(interval):
    g = TimeGrid(1.0, 100)
    b = simulate_path(interval, constant_control(interval, 0, 100), g, seed=1, n_paths=3)
    assert qv_integral(1.0, b, 0, 0)[0] == pytest.approx(0.5, rel=1e-13)
    assert qv_integral(3.0, b, 0, 0)[0] == pytest.approx(1.5, rel=1e-13)
    # closed-form Stieltjes integral of t against 0.5 dt is 0.25; left sum bias is 0.5 dt / 2
    assert qv_integral(g.times, b, 0, 0)[0] == pytest.approx(0.25 - 0.25 / 100, rel=1e-12)
    with pytest.raises(ValidationError):
        qv_integral(1.0, b, 1, 0)


def test_directional_qv_2d():
    u = UncertaintySet([np.diag([1.0, 2.0])])
    g = TimeGrid(1.0, 4)
    b = simulate_path(u, constant_control(u, 0, 4), g, seed=0)
    assert directional_qv(b, [1.0, 1.0])[-1] == pytest.approx(5.0)
    assert directional_qv(b, [1.0, 0.0], [0.0, 1.0])[-1] == 0.0


def test_ito_residual_trivial_cases(interval):
    g = TimeGrid(1.0, 32)
    b = simulate_path(interval, enumerate_controls(interval, 32, 4, seed=1)[3], g, seed=2, n_paths=50)
    ident = SmoothFunction(lambda x: x[..., 0], lambda x: np.ones_like(x), lambda x: np.zeros(x.shape + (1,)))
    const = SmoothFunction(lambda x: np.full(x.shape[:-1], 3.0), np.zeros_like, lambda x: np.zeros(x.shape + (1,)))
    assert np.max(ito_formula_residual(b, ident, [0.0])) < 1e-13
    assert np.max(ito_formula_residual(b, const, [0.0])) == 0.0


def test_ito_residual_rate(interval):
    rms = []
    ns = [2 ** k for k in range(5, 10)]
    for n in ns:
        g = TimeGrid(1.0, n)
        b = simulate_path(interval, constant_control(interval, 1, n), g, seed=8, n_paths=1000)
        rms.append(np.sqrt(np.mean(ito_formula_residual(b, square, [0.0]) ** 2)))
    slope = -np.polyfit(np.log2(ns), np.log2(rms), 1)[0]
    assert 0.4 < slope < 0.6


def test_mg_norm():
    g = TimeGrid(1.0, 10)
    assert mg_norm(np.full((4, 11), -2.0), g) == pytest.approx(2.0)
    assert mg_norm(np.zeros((4, 11)), g) == 0.0
    with pytest.raises(ValidationError):
        mg_norm(np.zeros((4, 11)), g, p=0.5)


def test_mg_norm_of_b(interval):
    # int_0^1 sigma_max^2 t dt = 0.5 with the left-point rule bias -0.5/n
    n = 50
    g = TimeGrid(1.0, n)
    b = simulate_path(interval, constant_control(interval, 1, n), g, seed=3, n_paths=20000)
    b0 = simulate_path(interval, constant_control(interval, 0, n), g, seed=3, n_paths=20000)
    s = np.stack([b.b_path[:, :, 0], b0.b_path[:, :, 0]])
    assert mg_norm(s, g) == pytest.approx(np.sqrt(0.5 - 0.5 / n), rel=0.02)


def test_export_csv(tmp_path, interval):
    g = TimeGrid(1.0, 4)
    b = simulate_path(interval, constant_control(interval, 1, 4), g, seed=6, n_paths=2)
    dest = tmp_path / "p.csv"
    export_csv(b, dest, path_index=1, scenario_id=3)
    rows = list(csv.reader(open(dest)))
    assert rows[0] == ["t", "B_1", "qv_11", "scenario_id", "seed"]
    assert len(rows) == 6
    assert float(rows[-1][1]) == b.b_path[1, -1, 0]
    assert rows[-1][3:] == ["3", "6"]


def test_grid_validation():
    with pytest.raises(ValidationError):
        TimeGrid(0.0, 3)
    with pytest.raises(ValidationError):
        TimeGrid(1.0, 0)
