import math

import numpy as np
import pytest
from scipy.special import erf

from pdmeta.services.funcspace import (
    Domain,
    DomainError,
    constant,
    gauss,
    monomial,
    scaled_tanh,
    sech_pow,
)
from pdmeta.services.generator import (
    ConstructionError,
    GeneratorSpec,
    Parity,
    build_g,
    build_psi,
    construct,
    effective_ell,
    mu_from_mass,
    normalize_psi,
    perturb_model,
    physical_potential,
    potential_from_intertwiner,
    probe_points,
)
from pdmeta.services.validators import ValidationException


def example_2i_spec(beta=0.0):
    return GeneratorSpec(
        dimension=1,
        parity=Parity.EVEN,
        mass=sech_pow(0.5, 2),
        f=scaled_tanh(0.5, 1.0),
        beta=beta,
    )


@pytest.mark.parametrize(
    "dimension,ell,parity,expected",
    [
        (3, 0, None, 0.0),
        (3, 2, None, 2.0),
        (2, 0, None, -0.5),
        (4, 1, None, 1.5),
        (1, None, "even", -1.0),
        (1, None, Parity.ODD, 0.0),
    ],
)
def test_effective_ell(dimension, ell, parity, expected):
    assert effective_ell(dimension, ell, parity) == expected


@pytest.mark.parametrize("dimension,ell,parity", [(1, 0, None), (3, None, "even"), (3, -2, None)])
def test_effective_ell_rejects_mismatched_input(dimension, ell, parity):
    with pytest.raises(ValidationException):
        effective_ell(dimension, ell, parity)


def test_mu_from_mass_examples():
    mu = mu_from_mass(monomial(0.5, 2).on(Domain.HALF_LINE))
    assert mu.eval(2.0) == pytest.approx(0.5, rel=1e-15)
    assert mu.deriv(1, 2.0) == pytest.approx(-0.25, rel=1e-14)

    unit = mu_from_mass(constant(0.5))
    assert unit.eval(3.0) == 1.0
    assert unit.deriv(1, 3.0) == 0.0

    hyperbolic = mu_from_mass(sech_pow(0.5, 2))
    assert hyperbolic.eval(0.0) == pytest.approx(1.0, rel=1e-15)
    r = np.linspace(-3.0, 3.0, 13)
    np.testing.assert_allclose(hyperbolic.eval(r), np.cosh(r), rtol=1e-14)
    np.testing.assert_allclose(hyperbolic.deriv(1, r), np.sinh(r), rtol=1e-13, atol=1e-15)


def test_mu_from_mass_rejects_nonpositive_mass():
    with pytest.raises(DomainError):
        mu_from_mass(constant(-1.0))
    with pytest.raises(DomainError):
        mu_from_mass(monomial(-0.5, 2).on(Domain.HALF_LINE))


def test_build_g_examples():
    g = build_g(monomial(1.0, 1).on(Domain.HALF_LINE), 0.0)
    assert g.eval(1.0) == pytest.approx(math.exp(-1.0), rel=1e-12)

    g_sech = build_g(scaled_tanh(0.5, 1.0), -1.0)
    assert g_sech.eval(0.0) == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_allclose(g_sech.eval(np.array([-2.0, 1.0, 3.0])), 1.0 / np.cosh([-2.0, 1.0, 3.0]), rtol=1e-11)

    g_pure = build_g(constant(0.0).on(Domain.HALF_LINE), 0.0)
    r = np.array([0.5, 2.0, 5.0])
    np.testing.assert_allclose(g_pure.eval(r), r**2, rtol=1e-15)


def test_build_g_scale_multiplies():
    f = monomial(1.0, 1).on(Domain.HALF_LINE)
    assert build_g(f, 0.0, g_scale=3.0).eval(1.2) == pytest.approx(3.0 * build_g(f, 0.0).eval(1.2), rel=1e-14)


def test_build_psi_examples():
    f = monomial(1.0, 1).on(Domain.HALF_LINE)
    modulus, phase = build_psi(f, build_g(f, 0.0), 0.0)
    assert modulus.eval(1.0) == pytest.approx(math.exp(-0.5), rel=1e-12)
    expected_phase = 0.5 * math.exp(-1.0) - math.sqrt(math.pi) / 4.0 * erf(1.0)
    assert phase.eval(1.0) == pytest.approx(expected_phase, abs=1e-11)

    flat, _ = build_psi(constant(0.0), constant(1.0), -1.0)
    np.testing.assert_allclose(flat.eval(np.array([-3.0, 0.0, 2.0])), 1.0)


def test_construct_example_1a(example_1a):
    assert example_1a.ell_d == 0.0
    assert example_1a.g.eval(1.0) == pytest.approx(math.exp(-1.0), rel=1e-12)
    assert example_1a.W.eval(1.0) == pytest.approx(2.0 * math.exp(-1.0), rel=1e-11)
    assert example_1a.V_tilde.eval(1.0) == pytest.approx(-2.0 - math.exp(-2.0), rel=1e-11)
    assert example_1a.E == complex(0.0, 0.0)
    assert example_1a.domain is Domain.HALF_LINE


def test_construct_example_2i_is_hermitian():
    model = construct(example_2i_spec(beta=0.0))
    probes = probe_points(model.domain)
    # rounding in W grows with mu = cosh(x)
    assert np.all(np.abs(model.W.eval(probes)) <= 1e-12 * np.maximum(1.0, model.mu.eval(probes)))
    assert model.V_tilde.eval(0.0) == pytest.approx(-1.5, abs=1e-12)
    assert model.E.imag == 0.0


def test_construct_trivial_model():
    spec = GeneratorSpec(dimension=3, ell=0, mass=constant(0.5), f=constant(0.0), beta=1.0)
    model = construct(spec)
    r = np.array([0.5, 1.0, 2.0, 3.5])
    assert model.E == complex(1.0, 0.0)
    np.testing.assert_allclose(model.g.eval(r), r**2, rtol=1e-14)
    np.testing.assert_allclose(model.W.eval(r), -4.0 * r, rtol=1e-14)
    np.testing.assert_allclose(model.V_tilde.eval(r), -(r**4) + 1.0, rtol=1e-13)
    assert model.W.eval(2.0) == pytest.approx(-8.0)


def test_constructed_fields_satisfy_definitions(example_1a):
    r = probe_points(example_1a.domain)
    mu = example_1a.mu.eval(r)
    np.testing.assert_allclose(example_1a.G.eval(r), example_1a.g.eval(r) * mu, rtol=1e-14)
    np.testing.assert_allclose(example_1a.F.eval(r), (r - 1.0 / r) * mu, rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(example_1a.psi_modulus.eval(r), r * np.exp(-0.5 * r * r), rtol=1e-11, atol=1e-300)


def test_f_formula_identity(example_1a):
    r = probe_points(example_1a.domain)
    mu, dmu = example_1a.mu.eval(r), example_1a.mu.deriv(1, r)
    G, dG = example_1a.G.eval(r), example_1a.G.deriv(1, r)
    expected = (dmu * G - mu * dG) / (2.0 * G)
    np.testing.assert_allclose(example_1a.F.eval(r), expected, rtol=1e-12, atol=1e-12)


def test_potential_decomposition(example_1a):
    r = probe_points(example_1a.domain)
    mu, dmu = example_1a.mu.eval(r), example_1a.mu.deriv(1, r)
    centrifugal = example_1a.ell_d * (example_1a.ell_d + 1.0) * mu * mu / r**2
    mass_gradient = 2.0 * mu * dmu / r
    rebuilt = physical_potential(example_1a).eval(r) + centrifugal + mass_gradient
    np.testing.assert_allclose(rebuilt, example_1a.V_tilde.eval(r), rtol=1e-10)
    np.testing.assert_allclose(
        potential_from_intertwiner(example_1a).eval(r), example_1a.V_tilde.eval(r), rtol=1e-10, atol=1e-10
    )


def test_beta_shifts_only_the_constant():
    shifted = construct(example_2i_spec(beta=2.5))
    base = construct(example_2i_spec(beta=0.0))
    x = np.linspace(-3.0, 3.0, 9)
    np.testing.assert_allclose(shifted.V_tilde.eval(x) - base.V_tilde.eval(x), 2.5, rtol=0, atol=1e-12)
    np.testing.assert_allclose(shifted.W.eval(x), base.W.eval(x), atol=1e-15)
    assert shifted.E == complex(2.5, 0.0)


def test_construct_names_failing_stage():
    spec = GeneratorSpec(dimension=3, ell=0, mass=gauss(-1.0, 1.0), f=constant(0.0))
    with pytest.raises(ConstructionError) as exc_info:
        construct(spec)
    assert exc_info.value.stage == "mu"
    assert isinstance(exc_info.value.cause, DomainError)


def test_spec_validation():
    with pytest.raises(ValidationException):
        GeneratorSpec(dimension=3, mass=constant(0.5), f=constant(0.0))
    with pytest.raises(ValidationException):
        GeneratorSpec(dimension=1, ell=0, mass=constant(0.5), f=constant(0.0))
    with pytest.raises(ValidationException):
        GeneratorSpec(dimension=3, ell=0, mass=constant(0.5), f=constant(0.0), g_scale=0.0)
    with pytest.raises(ValidationException):
        GeneratorSpec(dimension=3, ell=0, mass=constant(0.5), f=constant(0.0), beta=math.nan)


def test_perturb_model(example_1a):
    perturbed = perturb_model(example_1a, W_shift=0.1, F_shift=-0.2)
    r = np.array([0.5, 1.0])
    np.testing.assert_allclose(perturbed.W.eval(r) - example_1a.W.eval(r), 0.1, rtol=1e-12)
    np.testing.assert_allclose(perturbed.F.eval(r) - example_1a.F.eval(r), -0.2, rtol=1e-12)
    assert perturbed.perturbation == {"W_shift": 0.1, "F_shift": -0.2}
    assert perturb_model(example_1a) is example_1a


def test_normalize_psi(example_1a):
    norm = normalize_psi(example_1a, 0.05, 8.0)
    # integral of r^2 exp(-r^2) over (0, inf) is sqrt(pi)/4; the cut near 0 is below 5e-5
    assert norm**2 == pytest.approx(math.sqrt(math.pi) / 4.0, abs=1e-4)


def test_probe_points():
    half = probe_points(Domain.HALF_LINE, 64)
    assert half.size == 64 and np.all(half > 0) and np.all(np.diff(half) > 0)
    full = probe_points(Domain.FULL_LINE, 64)
    np.testing.assert_allclose(full, -full[::-1])
    assert not np.any(full == 0.0)
