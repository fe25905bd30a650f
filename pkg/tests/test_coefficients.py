import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gsdelab import coefficients as co
from gsdelab import moduli
from gsdelab.errors import ConfigError, ValidationError


def _vector_const(v):
    v = np.asarray(v, dtype=np.float64)
    return co.Term(lambda t, x: np.broadcast_to(v, np.shape(x)).copy(), "vec", growth=(float(v @ v), 0.0))


def test_truncation_examples():
    unit = co.CoefficientSet(2, _vector_const([0.6, 0.8]), (co.zero(2),))
    cl = co.truncate_coefficients(unit, 2.0)
    np.testing.assert_allclose(cl.b(0.0, np.zeros((1, 2))), [[0.6, 0.8]], rtol=1e-15)
    big = co.CoefficientSet(2, _vector_const([3.0, 4.0]), (co.zero(2),))
    np.testing.assert_allclose(co.truncate_coefficients(big, 2.5).b(0.0, np.zeros((1, 2))), [[1.5, 2.0]],
                               rtol=1e-15)


@given(seed=st.integers(0, 1000))
def test_truncation_limit(seed):
    x = np.random.default_rng(seed).normal(0, 10, (50, 1))
    c = co.make_coefficients("linear_drift(-2)", "lipschitz_sigma(0.5, 1)")
    t = co.truncate_coefficients(c, 1e6)
    np.testing.assert_array_equal(t.b(0.0, x), c.b(0.0, x))
    np.testing.assert_array_equal(t.sigma[0](0.0, x), c.sigma[0](0.0, x))
    small = co.truncate_coefficients(c, 0.5)
    assert np.all(np.abs(small.b(0.0, x)) <= 0.5 + 1e-15)


def test_truncation_rejects_bad_cap():
    with pytest.raises(ValidationError):
        co.truncate_coefficients(co.make_coefficients("zero", "constant_sigma(1)"), 0.0)


@pytest.mark.parametrize("b,sigma,regime", [
    ("linear_drift(-1)", "lipschitz_sigma(0.5, 1)", "H1H2"),
    ("rlogr_sqrt_drift(1)", "constant_sigma(1)", "H1H2"),
    ("rlogr_drift(1)", "lipschitz_sigma(0.5, 1)", "H1pH2p"),
    ("rlogr_sqrt_drift(0.5)", "lipschitz_sigma(1, 0)", "H1pH2p"),
])
def test_catalog_sets_satisfy_declared_bounds(b, sigma, regime):
    c = co.make_coefficients(b, sigma, regime=regime)
    slacks = c.spot_check(n_samples=4000, seed=3)
    assert min(slacks.values()) >= 0, slacks
    c.validate()


def test_h2_rejects_first_moment_only_terms():
    with pytest.raises(ValidationError):
        co.make_coefficients("rlogr_drift(1)", "constant_sigma(1)", regime="H1H2")


def test_non_osgood_modulus_rejected():
    bad = co.Term(lambda t, x: np.sqrt(np.abs(x)), "sqrt_drift", growth=(1.0, 1.0),
                  mod2=moduli.sqrt_modulus())
    with pytest.raises(ValidationError):
        co.CoefficientSet(1, bad, (co.constant_sigma(1.0),))


def test_false_declaration_caught():
    liar = co.Term(lambda t, x: 5.0 * x, "liar", growth=(0.0, 25.0), mod1=moduli.linear(0.1),
                   mod2=moduli.linear(0.01))
    c = co.CoefficientSet(1, liar, (co.constant_sigma(1.0),))
    with pytest.raises(ValidationError):
        c.validate()


def test_moduli_assembly():
    c = co.make_coefficients("linear_drift(2)", "lipschitz_sigma(3, 1)", h={(0, 0): "linear_h(1)"})
    assert c.has_h
    assert c.rho(0.5) == pytest.approx((4 + 9 + 1) * 0.5)
    assert c.growth == pytest.approx((2.0, 4 + 18 + 1))
    two = co.make_coefficients("rlogr_drift(1)", "lipschitz_sigma(1, 0)", regime="H1pH2p")
    assert two.rho3(0.2) == pytest.approx(0.2)
    assert two.rho13.osgood is True


def test_term_catalog_errors():
    with pytest.raises(ConfigError):
        co.term("warp_drift(9)")
    with pytest.raises(ValidationError):
        co.CoefficientSet(1, co.zero(), (co.constant_sigma(1),), h={(0, 1): co.constant_h(1)})
    with pytest.raises(ValidationError):
        co.CoefficientSet(1, co.zero(), (co.constant_sigma(1),), regime="H3")
