"""
Regularly varying functions, inverses and psi.

Run with: pytest tests/test_regvar.py
"""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from errors import (
    ConfigError,
    DomainTooSmall,
    InadmissibleExponent,
    InadmissibleSlowlyVarying,
    InvalidParameter,
)
from regvar import (
    doubling_constant,
    function_from_config,
    invert,
    make_function,
    make_psi,
)


def test_pow_values_and_derivatives():
    h = make_function("pow", c=1.5)
    assert h.h(4.0) == pytest.approx(8.0)
    assert h.dh(4.0) == pytest.approx(1.5 * 2.0)
    assert h.d2h(4.0) == pytest.approx(0.75 / 2.0)


@pytest.mark.parametrize("c", [0.9, 2.0, 2.5, float("nan")])
def test_exponent_outside_range_rejected(c):
    with pytest.raises(InadmissibleExponent):
        make_function("pow", c=c)


def test_unknown_family_is_config_error():
    with pytest.raises(ConfigError) as exc:
        make_function("bogus", c=1.5)
    assert "family" in str(exc.value)


def test_unknown_param_is_config_error():
    with pytest.raises(ConfigError):
        make_function("pow", {"a": 0.5}, c=1.5)


def test_pure_power_needs_c_above_one():
    with pytest.raises(InadmissibleSlowlyVarying):
        make_function("pow", c=1.0)


def test_explog_exponent_range():
    with pytest.raises(InadmissibleSlowlyVarying):
        make_function("pow_explog", {"a": 1.5})
    with pytest.raises(InadmissibleExponent):
        make_function("pow_explog", {"a": 0.5}, c=1.2)


def test_x0_below_family_start():
    with pytest.raises(DomainTooSmall):
        make_function("pow_log", c=1.05, x0=1.0)


def test_div_log_not_convex_for_small_c():
    with pytest.raises(DomainTooSmall):
        make_function("pow_div_log", c=1.1)


def test_config_block_missing_exponent():
    with pytest.raises(ConfigError) as exc:
        function_from_config({"family": "pow"})
    assert "c" in str(exc.value)


def test_config_block_unknown_key():
    with pytest.raises(ConfigError):
        function_from_config({"family": "pow", "c": 1.5, "colour": "red"})


def test_exact_exponent_only_for_short_fractions():
    assert make_function("pow", c=1.5).exact_exponent is not None
    assert make_function("pow", c=1.05).exact_exponent is None
    assert make_function("pow_log", c=1.5).exact_exponent is None


def test_compare_at_integer_exact():
    h = make_function("pow", c=1.5)
    assert h.compare_at_integer(4, 8) == 0
    assert h.compare_at_integer(3, 5) == 1     # 27 > 25
    assert h.compare_at_integer(3, 6) == -1    # 27 < 36
    with pytest.raises(InvalidParameter):
        make_function("pow", c=1.05).compare_at_integer(3, 3)


@settings(max_examples=60, deadline=None)
@given(c=st.floats(1.01, 1.99), y=st.floats(1.0, 1e9))
def test_closed_form_inverse(c, y):
    inv = invert(make_function("pow", c=c))
    assert inv.mode == "closed_form"
    assert inv.base.h(inv.phi(y)) == pytest.approx(y, rel=1e-11)


@pytest.mark.parametrize("family,params,c", [
    ("pow_log", None, 1.05),
    ("pow_log", None, 1.5),
    ("pow_explog", {"a": 0.5}, 1.0),
])
def test_newton_inverse(family, params, c):
    inv = invert(make_function(family, params, c=c))
    assert inv.mode == "newton_bisection"
    ys = np.geomspace(inv.y0, 1e12, 50)
    back = inv.base.h(inv.phi(ys))
    np.testing.assert_allclose(back, ys, rtol=1e-10)


def test_dphi_matches_finite_difference():
    inv = invert(make_function("pow_log", c=1.05))
    for y in (1e3, 1e5, 1e8):
        step = 1e-4 * y
        fd = (inv.phi(y + step) - inv.phi(y - step)) / (2 * step)
        assert inv.dphi(y) == pytest.approx(fd, rel=1e-6), f"phi' mismatch at y={y}"


def test_tangent_extension_below_y0():
    inv = invert(make_function("pow_log", c=1.05))
    assert inv.y0 > 1.0
    expected = inv.base.x0 + (1.0 - inv.y0) * inv.slope0
    assert inv.phi(1.0) == pytest.approx(expected)
    assert inv.dphi(1.0) == pytest.approx(inv.slope0)


@pytest.mark.parametrize("c", [1.05, 1.25, 1.75])
def test_doubling_constant_of_pure_power(c):
    inv = invert(make_function("pow", c=c))
    assert doubling_constant(inv) == pytest.approx(2 ** (1 - 1 / c), rel=1e-9)


def test_psi_clipped_at_half():
    psi = make_psi(invert(make_function("pow", c=1.5)))
    assert psi.psi(1.0) == 0.5
    assert psi.clip_point == pytest.approx((4.0 / 3.0) ** 3, rel=1e-9)
    assert psi.psi(1000.0) == pytest.approx((2.0 / 3.0) * 1000.0 ** (-1.0 / 3.0))


def test_psi_nonincreasing_and_positive():
    psi = make_psi(invert(make_function("pow_log", c=1.25)), kappa=2.0)
    xs = np.geomspace(1.0, 1e9, 400)
    vals = psi.psi(xs)
    assert np.all(vals > 0)
    assert np.all(vals <= 0.5)
    assert np.all(np.diff(vals) <= 1e-15), "psi must be nonincreasing"


def test_difference_psi():
    inv = invert(make_function("pow", c=1.5))
    psi = make_psi(inv, kind="difference")
    assert psi.psi(7.0) == pytest.approx(4.0 - 7.0 ** (2.0 / 3.0))


@pytest.mark.parametrize("kappa", [0.0, -1.0, math.inf])
def test_kappa_must_be_positive(kappa):
    inv = invert(make_function("pow", c=1.5))
    with pytest.raises(InvalidParameter):
        make_psi(inv, kappa=kappa)


def test_unknown_psi_kind():
    inv = invert(make_function("pow", c=1.5))
    with pytest.raises(ConfigError):
        make_psi(inv, kind="integral")
