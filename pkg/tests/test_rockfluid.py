import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from twophase.rockfluid import (
    BrooksCoreyCapillary,
    CoreyRelPerm,
    FluidProps,
    LinearCapillary,
    QuadraticRelPerm,
    RockProps,
    ZeroCapillary,
    capillary_derivative,
    capillary_pressure,
    effective_saturation,
    relative_permeability,
    upwind_coefficient,
)


def test_effective_saturation_examples():
    assert effective_saturation(1.0) == 1.0
    assert effective_saturation(0.2) == pytest.approx(0.2)
    assert effective_saturation(-0.05) == pytest.approx(1e-3)
    rock = RockProps.uniform(1, 0.2, 1e-13, s_wr=0.2, s_nr=0.1)
    assert effective_saturation(0.55, rock) == pytest.approx(0.5)


def test_capillary_examples():
    assert capillary_pressure(1.0, LinearCapillary(1e5)) == pytest.approx(0.0)
    bc = BrooksCoreyCapillary(1e5, 2.5)
    assert capillary_pressure(1.0, bc) == pytest.approx(1e5)
    assert capillary_pressure(0.5, bc) == pytest.approx(1e5 * 2 ** 0.4, rel=1e-12)
    assert np.all(capillary_pressure(np.linspace(0, 1, 5), ZeroCapillary()) == 0)


def test_linear_derivative_has_chain_factor():
    rock = RockProps.uniform(1, 0.2, 1e-13, s_wr=0.1, s_nr=0.1)
    assert capillary_derivative(0.5, LinearCapillary(1e5), rock) == pytest.approx(-1e5 / 0.8)


def test_derivative_zero_on_clamp():
    for model in (LinearCapillary(1e5), BrooksCoreyCapillary(1e6, 2.5)):
        assert capillary_derivative(-0.1, model) == 0.0
        assert capillary_derivative(1.2, model) == 0.0


@pytest.mark.parametrize("model", [LinearCapillary(1e4), BrooksCoreyCapillary(1e6, 2.5),
                                   BrooksCoreyCapillary(2e4, 0.8)])
def test_capillary_derivative_matches_fd(model):
    s = np.linspace(0.05, 0.95, 19)
    h = 1e-7
    fd = (capillary_pressure(s + h, model) - capillary_pressure(s - h, model)) / (2 * h)
    np.testing.assert_allclose(capillary_derivative(s, model), fd, rtol=1e-6)


def test_quadratic_and_corey_values():
    krw, krn = relative_permeability(0.5, QuadraticRelPerm())
    assert (krw, krn) == pytest.approx((0.25, 0.25))
    lam = 2.0
    krw, krn = relative_permeability(0.5, CoreyRelPerm(lam))
    assert krw == pytest.approx(0.5 ** 4)
    assert krn == pytest.approx(0.25 * (1 - 0.5 ** 2))


@pytest.mark.parametrize("model", [QuadraticRelPerm(), CoreyRelPerm(2.5), CoreyRelPerm(0.8)])
def test_relperm_derivatives_match_fd(model):
    s = np.linspace(0.05, 0.95, 19)
    h = 1e-7
    _, _, dkrw, dkrn = model.evaluate(s)
    up, um = model.evaluate(s + h), model.evaluate(s - h)
    np.testing.assert_allclose(dkrw, (up[0] - um[0]) / (2 * h), rtol=1e-6, atol=1e-9)
    np.testing.assert_allclose(dkrn, (up[1] - um[1]) / (2 * h), rtol=1e-6, atol=1e-9)


def test_upwind_branches():
    assert upwind_coefficient("a", "b", 1.0) == "a"
    assert upwind_coefficient("a", "b", -1.0) == "b"
    assert upwind_coefficient("a", "b", 0.0) == "b"


def test_property_validation():
    with pytest.raises(ValueError):
        FluidProps(mu_n=-1.0)
    with pytest.raises(ValueError):
        RockProps(np.array([0.0]), np.array([1e-13]))
    with pytest.raises(ValueError):
        RockProps.uniform(2, 0.2, 1e-13, s_wr=0.6, s_nr=0.5)
    with pytest.raises(ValueError):
        BrooksCoreyCapillary(1e5, 0.0)


sat = st.floats(-0.2, 1.2)
models = st.sampled_from([LinearCapillary(1e5), BrooksCoreyCapillary(1e6, 2.5), BrooksCoreyCapillary(1e5, 0.8)])


@given(sat, sat, models)
def test_capillary_non_increasing(a, b, model):
    lo, hi = min(a, b), max(a, b)
    assert capillary_pressure(lo, model) >= capillary_pressure(hi, model) - 1e-9


@given(sat, sat, st.sampled_from([QuadraticRelPerm(), CoreyRelPerm(2.5), CoreyRelPerm(0.8)]))
def test_relperm_bounded_and_monotone(a, b, model):
    lo, hi = min(a, b), max(a, b)
    krw_lo, krn_lo = relative_permeability(lo, model)
    krw_hi, krn_hi = relative_permeability(hi, model)
    for v in (krw_lo, krn_lo, krw_hi, krn_hi):
        assert 0.0 <= v <= 1.0
    assert krw_lo <= krw_hi + 1e-15
    assert krn_lo >= krn_hi - 1e-15
