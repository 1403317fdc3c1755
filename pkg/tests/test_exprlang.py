import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hydrosym import exprlang as el
from conftest import VARS, derivative_close, mp_derivative, random_expr_text


def test_precedence_and_power_chain():
    e = el.parse("2 + 3*x^2^0.5")
    # ^ is left-associative here: (x^2)^0.5 folds the exponent chain into |x| only via sqrt
    assert el.evaluate(e, {"x": 3.0}) == pytest.approx(2 + 3 * 3.0)
    assert el.evaluate(el.parse("-x^2"), {"x": 2.0}) == -4.0


def test_params_substituted_at_parse():
    e = el.parse("g*u", {"u"}, {"g": 1.4})
    assert e.free_vars == frozenset({"u"})
    assert el.evaluate(e, {"u": 2.0}) == pytest.approx(2.8)


@pytest.mark.parametrize("src, offset", [("u1 + * u2", 5), ("(a + b", 6), ("a $ b", 2), ("", 0)])
def test_syntax_errors_carry_offsets(src, offset):
    with pytest.raises(el.ExprSyntaxError) as info:
        el.parse(src)
    assert info.value.offset == offset


def test_unknown_identifier_and_variable_exponent():
    with pytest.raises(el.UnknownIdentifier):
        el.parse("u + w", {"u"})
    with pytest.raises(el.NonConstantExponent):
        el.parse("u^v")


def test_domain_error_strict_vs_unchecked():
    e = el.parse("ln(x)")
    with pytest.raises(el.DomainError):
        el.evaluate(e, {"x": -1.0})
    with np.errstate(invalid="ignore"):
        assert np.isnan(el.evaluate_unchecked(e, {"x": -1.0}))


def test_vectorized_evaluation():
    e = el.parse("x*y + exp(x)")
    x = np.linspace(0, 1, 7)
    np.testing.assert_allclose(el.evaluate(e, {"x": x, "y": 2.0}), 2 * x + np.exp(x))


def test_abs_derivative_uses_sign():
    d = el.differentiate(el.parse("abs(x - 1)"), "x")
    assert el.evaluate(d, {"x": np.array([0.0, 1.0, 2.0])}).tolist() == [-1.0, 0.0, 1.0]


def test_substitute():
    e = el.substitute(el.parse("u^2 + rho"), {"u": el.parse("(s + r)/2"), "rho": 3.0})
    assert el.evaluate(e, {"s": 1.0, "r": 3.0}) == pytest.approx(7.0)


def test_substitute_refuses_opaque():
    op = el.Opaque("q", lambda b: b["u"], {"u"})
    with pytest.raises(el.ExprError):
        el.substitute(el.add(op, el.var("u")), {"u": 1.0})


@pytest.mark.parametrize("src, lower", [("3*x^2 + 2", 0.0), ("x^-2", 1.0), ("exp(2*x)*y", 0.5),
                                        ("x^0.5*y^2", 0.0)])
def test_antiderivative(src, lower):
    e = el.parse(src)
    F = el.antiderivative(e, "x", lower)
    pt = {"x": 1.7, "y": 0.3}
    assert el.evaluate(el.differentiate(F, "x"), pt) == pytest.approx(el.evaluate(e, pt), rel=1e-13)
    assert el.evaluate(F, {"x": lower, "y": 0.3}) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("src, lower", [("1/x", 1.0), ("x^-2", 0.0), ("ln(x)", 1.0)])
def test_antiderivative_unsupported(src, lower):
    with pytest.raises(el.UnsupportedAntiderivative):
        el.antiderivative(el.parse(src), "x", lower)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 6))
def test_round_trip_is_exact(seed, depth):
    e = el.parse(random_expr_text(np.random.default_rng(seed), depth))
    text = el.to_text(e)
    again = el.parse(text)
    assert again == e
    assert el.to_text(again) == text


@settings(max_examples=200, deadline=None)
@given(st.floats(-1e6, 1e6, allow_nan=False), st.floats(-1e6, 1e6, allow_nan=False))
def test_constants_print_exactly(a, b):
    e = el.add(el.mul(el.const(a), el.var("x")), el.const(b))
    assert el.parse(el.to_text(e)) == e


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.2, 2.0), st.floats(0.2, 2.0), st.floats(0.2, 2.0))
def test_derivative_matches_high_precision_difference(seed, x, y, z):
    e = el.parse(random_expr_text(np.random.default_rng(seed), 4))
    pt = {"x": x, "y": y, "z": z}
    try:
        val = el.evaluate(e, pt)
    except el.ExprError:
        return
    if not np.isfinite(val) or abs(val) > 1e8:
        return
    for v in VARS:
        try:
            d = float(el.evaluate(el.differentiate(e, v), pt))
        except el.DomainError:
            continue  # e.g. sqrt(abs(.)) at a kink: not differentiable there
        ref = mp_derivative(e, pt, v)
        assert derivative_close(d, ref, val)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_derivative_is_linear(seed):
    rng = np.random.default_rng(seed)
    a, b = (el.parse(random_expr_text(rng, 3)) for _ in range(2))
    lhs = el.differentiate(el.add(a, el.mul(el.const(2.0), b)), "x")
    rhs = el.add(el.differentiate(a, "x"), el.mul(el.const(2.0), el.differentiate(b, "x")))
    pt = {"x": 0.7, "y": 1.3, "z": 0.9}
    try:
        u, w = el.evaluate(lhs, pt), el.evaluate(rhs, pt)
    except el.ExprError:
        return
    assert u == pytest.approx(w, rel=1e-12, abs=1e-12)
