import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gsdelab.errors import ValidationError
from gsdelab.mollify import brute_force_mollify, gradient_constant, mollify


@given(c=st.floats(-100, 100), w=st.floats(1e-3, 1.0))
def test_constants_reproduced(c, w):
    x = np.linspace(-2, 2, 21)
    gw = mollify(lambda y: np.full_like(y, c), w)
    np.testing.assert_allclose(gw(x), c, rtol=1e-12, atol=1e-12)


@given(a=st.floats(-10, 10), b=st.floats(-10, 10), w=st.floats(1e-3, 1.0))
def test_affine_reproduced(a, b, w):
    x = np.linspace(-2, 2, 21)
    gw = mollify(lambda y: a * y + b, w)
    np.testing.assert_allclose(gw(x), a * x + b, rtol=1e-12, atol=1e-12 * (1 + abs(a) + abs(b)))


@pytest.mark.parametrize("w", [0.1, 0.01])
def test_abs_deviation_within_width(w):
    x = np.linspace(-1, 1, 2001)
    dev = np.max(np.abs(mollify(np.abs, w)(x) - np.abs(x)))
    assert dev <= w
    assert dev > 0.01 * w


def test_agrees_with_brute_force():
    w = 0.1
    x = np.linspace(-0.3, 0.3, 13)
    ref = brute_force_mollify(np.abs, w, x)
    np.testing.assert_allclose(mollify(np.abs, w)(x), ref, atol=1e-4 * w)


def test_gradient_constant_1d():
    # int |J'| = 2 J(0) for the normalised 1-D bump; oracle by brute-force trapezoid
    y = np.linspace(-1, 1, 400001)
    f = np.where(np.abs(y) < 1, np.exp(-1 / np.maximum(1 - y * y, 1e-300)), 0.0)
    j0 = np.exp(-1) / np.trapezoid(f, y)
    assert gradient_constant(1) == pytest.approx(2 * j0, rel=1e-8)


@pytest.mark.parametrize("w", [0.5, 0.1])
def test_lipschitz_bound_sharp_for_sign(w):
    # exact convolution of sign(x) has slope 2 J_w(0), which is the bound with sup|g| = 1
    x = np.linspace(-0.2 * w, 0.2 * w, 41)
    ref = brute_force_mollify(np.sign, w, x, n_fine=400001)
    slope = np.max(np.abs(np.diff(ref) / np.diff(x)))
    bound = mollify(np.sign, w).lipschitz_bound(1.0)
    # the trapezoid oracle resolves the jump of sign only to about 1e-4
    assert slope <= bound * (1 + 1e-3)
    assert slope >= 0.99 * bound


@pytest.mark.parametrize("w", [0.5, 0.1, 0.02])
def test_lipschitz_bound_holds(w):
    g = lambda y: np.clip(y / (0.3 * w), -1.0, 1.0)  # sup |g| = 1, steep but continuous
    gw = mollify(g, w)
    x = np.linspace(-1, 1, 40001)
    slope = np.max(np.abs(np.diff(gw(x)) / np.diff(x)))
    assert slope <= gw.lipschitz_bound(1.0)


def test_two_dimensional():
    gw = mollify(lambda y: 2 * y[..., 0] - y[..., 1] + 3, 0.2, n=2)
    x = np.random.default_rng(1).normal(size=(10, 2))
    np.testing.assert_allclose(gw(x), 2 * x[:, 0] - x[:, 1] + 3, rtol=1e-12)
    norm = mollify(lambda y: np.sqrt(np.sum(y * y, axis=-1)), 0.1, n=2)
    assert np.max(np.abs(norm(x) - np.linalg.norm(x, axis=1))) <= 0.1


def test_validation():
    with pytest.raises(ValidationError):
        mollify(np.abs, 0.0)
    with pytest.raises(ValidationError):
        mollify(np.abs, 0.1, n=4)
