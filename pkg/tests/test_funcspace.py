import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdmeta.services.funcspace import (
    Domain,
    DomainError,
    RadialFunction,
    antiderivative,
    antiderivative_of,
    constant,
    decay_cutoff,
    deriv,
    dilate,
    evaluate,
    exp_of,
    gauss,
    improper_integral,
    monomial,
    power,
    product_of,
    scale,
    scaled_tanh,
    sech_pow,
    shift,
    sum_of,
)
from pdmeta.services.validators import ValidationException


PROBES = np.geomspace(0.1, 3.0, 25)


def test_eval_examples():
    assert evaluate(monomial(1, 1), 2.0) == 2.0
    assert evaluate(sech_pow(0.5, 2), 0.0) == 0.5
    assert evaluate(product_of(monomial(1, 2), gauss(1, 1)), 1.0) == pytest.approx(math.exp(-1), abs=1e-15)


def test_deriv_examples():
    np.testing.assert_allclose(deriv(monomial(0.5, 2), 2, np.array([0.3, 1.0, 7.0])), 1.0)
    assert deriv(scaled_tanh(0.5, 1), 1, 0.0) == pytest.approx(0.5)
    assert deriv(gauss(1, 1), 1, 1.0) == pytest.approx(-2.0 * math.exp(-1), abs=1e-15)


@pytest.mark.parametrize(
    "fun,lower,upper,expected",
    [
        (monomial(1, 1), 0.0, 1.0, 0.5),
        (product_of(monomial(1, 2), gauss(1, 1)), 0.0, 12.0, math.sqrt(math.pi) / 4.0),
        (sech_pow(1, 1), 0.0, 1.0, 2.0 * math.atan(math.tanh(0.5))),
    ],
)
def test_antiderivative_examples(fun, lower, upper, expected):
    result = antiderivative(fun, lower, upper, tol=1e-12)
    assert result.value == pytest.approx(expected, abs=1e-12)


def test_eval_returns_array_for_array_input():
    values = evaluate(gauss(2.0, 0.5), np.array([0.0, 1.0]))
    assert isinstance(values, np.ndarray)
    np.testing.assert_allclose(values, [2.0, 2.0 * math.exp(-0.5)])


@pytest.mark.parametrize(
    "fun,point",
    [
        (monomial(1, -1), 0.0),
        (monomial(1, -2), np.array([1.0, 0.0])),
        (monomial(1, 1, Domain.HALF_LINE), -1.0),
        (monomial(1, 1, Domain.HALF_LINE), 0.0),
        (gauss(1, 1), float("nan")),
        (power(monomial(1, 1), 0.5), -4.0),
    ],
)
def test_domain_violations_raise(fun, point):
    with pytest.raises(DomainError):
        evaluate(fun, point)


def test_domain_error_carries_points():
    with pytest.raises(DomainError) as exc_info:
        evaluate(monomial(1, -1), np.array([-1.0, 0.0, 2.0]))
    assert exc_info.value.points == [0.0]


def test_deriv_rejects_unsupported_order():
    with pytest.raises(ValidationException):
        deriv(gauss(1, 1), 3, 1.0)


def _fd_error(fun, order, h):
    if order == 1:
        fd = (fun.eval(PROBES + h) - fun.eval(PROBES - h)) / (2.0 * h)
    else:
        fd = (fun.deriv(1, PROBES + h) - fun.deriv(1, PROBES - h)) / (2.0 * h)
    return float(np.max(np.abs(fd - fun.deriv(order, PROBES))))


FD_FUNCTIONS = [
    monomial(1.5, 4),
    shift(-1.0, monomial(2.0, -2)),
    gauss(1.3, 0.7),
    scaled_tanh(0.5, 1.7),
    sech_pow(0.5, 2),
    sech_pow(2.0, 3),
    shift(0.4, gauss(1.0, 1.0)),
    scale(-2.0, sum_of(gauss(1, 1), scaled_tanh(1, 1))),
    product_of(monomial(1, 2), gauss(1, 1), scaled_tanh(1, 2)),
    power(sum_of(monomial(1, 2), constant(1.0)), -0.5),
    exp_of(scale(-1.0, monomial(0.5, 2))),
    dilate(1.5, sech_pow(1.0, 1)),
]


@pytest.mark.parametrize("fun", FD_FUNCTIONS)
@pytest.mark.parametrize("order", [1, 2])
def test_analytic_derivatives_match_central_differences(fun, order):
    coarse = _fd_error(fun, order, 1e-2)
    fine = _fd_error(fun, order, 5e-3)
    assert math.log2(coarse / fine) >= 1.9


def test_linearity_of_sum_and_scale():
    f = gauss(1.0, 0.3)
    g = scaled_tanh(2.0, 0.8)
    combo = 2.0 * f + 3.0 * g
    for order in (1, 2):
        np.testing.assert_allclose(
            combo.deriv(order, PROBES),
            2.0 * f.deriv(order, PROBES) + 3.0 * g.deriv(order, PROBES),
            rtol=1e-14,
            atol=1e-14,
        )
    np.testing.assert_allclose(combo.eval(PROBES), 2.0 * f.eval(PROBES) + 3.0 * g.eval(PROBES), rtol=1e-15)


@settings(max_examples=30, deadline=None)
@given(
    a=st.floats(0.1, 3.0),
    b=st.floats(0.1, 3.0),
    c=st.floats(-2.0, 2.0),
    k=st.integers(1, 4),
)
def test_product_rule_holds_exactly(a, b, c, k):
    f = gauss(c, a)
    g = product_of(scaled_tanh(1.0, b), sech_pow(1.0, k))
    fg = f * g
    expected = f.deriv(1, PROBES) * g.eval(PROBES) + f.eval(PROBES) * g.deriv(1, PROBES)
    np.testing.assert_allclose(fg.deriv(1, PROBES), expected, rtol=1e-12, atol=1e-14)


@settings(max_examples=20, deadline=None)
@given(
    a=st.floats(-1.0, 1.0),
    b=st.floats(-1.0, 1.0),
    c=st.floats(-1.0, 1.0),
)
def test_antiderivative_is_additive(a, b, c):
    fun = sum_of(gauss(1.0, 1.0), scaled_tanh(0.5, 2.0))
    tol = 1e-12
    ab = antiderivative(fun, a, b, tol).value
    bc = antiderivative(fun, b, c, tol).value
    ac = antiderivative(fun, a, c, tol).value
    assert abs(ab + bc - ac) <= 2 * tol + 1e-15


def test_antiderivative_of_has_integrand_as_derivative():
    fun = antiderivative_of(monomial(1, 1))
    np.testing.assert_allclose(fun.eval(PROBES), PROBES**2 / 2.0, atol=1e-12)
    np.testing.assert_allclose(fun.deriv(1, PROBES), PROBES, rtol=1e-15)
    np.testing.assert_allclose(fun.deriv(2, PROBES), 1.0)


def test_power_derivatives():
    root = power(monomial(1.0, 2, Domain.HALF_LINE), 0.5)
    np.testing.assert_allclose(root.eval(PROBES), PROBES, rtol=1e-15)
    np.testing.assert_allclose(root.deriv(1, PROBES), 1.0, rtol=1e-14)
    np.testing.assert_allclose(root.deriv(2, PROBES), 0.0, atol=1e-13)


def test_division_builds_reciprocal():
    ratio = gauss(1.0, 1.0) / monomial(1.0, 1, Domain.HALF_LINE)
    assert ratio.domain is Domain.HALF_LINE
    np.testing.assert_allclose(ratio.eval(PROBES), np.exp(-(PROBES**2)) / PROBES, rtol=1e-14)


@pytest.mark.parametrize(
    "fun,lower,expected",
    [
        (product_of(monomial(1, 2), gauss(1, 1)), 0.0, math.sqrt(math.pi) / 4.0),
        (sech_pow(1, 1), float("-inf"), math.pi),
        (product_of(monomial(1, 2), sech_pow(1, 1)), 0.0, math.pi**3 / 8.0),
    ],
)
def test_improper_integral(fun, lower, expected):
    assert improper_integral(fun, lower).value == pytest.approx(expected, abs=1e-11)


def test_decay_cutoff_requires_decaying_family():
    assert decay_cutoff(gauss(1, 1)) == 12.0
    assert decay_cutoff(sech_pow(1, 2)) == 40.0
    with pytest.raises(ValidationException):
        decay_cutoff(monomial(1, 2))


DESCRIPTORS = [
    {"family": "constant", "params": [0.5], "args": []},
    {"family": "monomial", "params": [0.5, 2], "args": []},
    {"family": "sech_pow", "params": [0.5, 2], "args": []},
    {
        "family": "sum",
        "params": [],
        "args": [
            {"family": "gauss", "params": [1.0, 0.25], "args": []},
            {
                "family": "scale",
                "params": [-3.0],
                "args": [{"family": "shift", "params": [0.1], "args": [{"family": "scaled_tanh", "params": [0.5, 1.0], "args": []}]}],
            },
        ],
    },
    {
        "family": "product",
        "params": [],
        "args": [
            {"family": "monomial", "params": [1.0, -1], "args": []},
            {"family": "gauss", "params": ["1/3", "2/7"], "args": []},
        ],
    },
]


@pytest.mark.parametrize("descriptor", DESCRIPTORS)
def test_descriptor_round_trip(descriptor):
    fun = RadialFunction.from_descriptor(descriptor)
    dumped = json.loads(json.dumps(fun.to_descriptor()))
    again = RadialFunction.from_descriptor(dumped)
    assert again == fun
    assert again.to_descriptor() == fun.to_descriptor()


def test_fraction_parameters_are_exact():
    fun = RadialFunction.from_descriptor({"family": "gauss", "params": ["1/3", "2/7"], "args": []})
    assert fun.node.coeff == 1.0 / 3.0
    assert fun.node.rate == 2.0 / 7.0


@pytest.mark.parametrize(
    "descriptor",
    [
        {"family": "cosine", "params": [1.0], "args": []},
        {"family": "monomial", "params": [1.0, 1.5], "args": []},
        {"family": "sech_pow", "params": [1.0, 0], "args": []},
        {"family": "gauss", "params": [1.0], "args": []},
        {"family": "scale", "params": [2.0], "args": []},
        {"family": "sum", "params": [], "args": []},
        {"family": "constant", "params": ["abc"], "args": []},
        "monomial",
    ],
)
def test_invalid_descriptors_raise(descriptor):
    with pytest.raises(ValidationException):
        RadialFunction.from_descriptor(descriptor)


def test_internal_nodes_are_not_serializable():
    with pytest.raises(ValidationException):
        power(gauss(1, 1), 0.5).to_descriptor()
