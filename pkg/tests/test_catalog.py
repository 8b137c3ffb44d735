import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdmeta.services.catalog import (
    EXAMPLE_IDS,
    constant_mass_reduction,
    crosscheck,
    get_example,
    line_reduction,
    list_ids,
    reduction_entries,
    relative_deviation,
)
from pdmeta.services.funcspace import constant, monomial, scaled_tanh, sech_pow
from pdmeta.services.generator import GeneratorSpec, construct
from pdmeta.services.validators import ValidationException
from pdmeta.services.verifier import check_consistency_ode, check_f_formula


@pytest.mark.parametrize(
    "entry_id,field,r,expected",
    [
        ("1A", "W", 1.0, 2.0 / math.e),
        ("1A", "V_tilde_minus_beta", 1.0, -2.0 - math.exp(-2.0)),
        ("1A", "g", 1.0, math.exp(-1.0)),
        ("2i", "V_tilde_minus_beta", 0.0, -1.5),
        ("2iv", "W", 1.0, -12.0 * math.cosh(1.0)),
        ("1C", "W", 2.0, 4.0 * math.exp(-4.0)),
    ],
)
def test_spot_values(entry_id, field, r, expected):
    model = construct(get_example(entry_id).spec)
    assert getattr(model, field).eval(r) == pytest.approx(expected, rel=1e-10, abs=1e-12)


def test_hermitian_entry_has_vanishing_W():
    model = construct(get_example("2i").spec)
    x = np.linspace(-5.0, 5.0, 101)
    assert np.all(np.abs(model.W.eval(x)) <= 1e-12 * np.maximum(1.0, np.cosh(x)))


@pytest.mark.parametrize("entry_id", EXAMPLE_IDS)
def test_crosscheck_passes(entry_id):
    record = crosscheck(entry_id)
    assert record.passed, record.notes
    assert set(record.deviations) == {"g", "W", "V_tilde_minus_beta", "psi_modulus"}
    assert all(value <= 1e-9 for value in record.deviations.values())


@pytest.mark.parametrize(
    "entry_id,expected,ok",
    [
        ("1A", 1.0, True),
        ("1B", 1.0, True),
        ("1C", 1.0, True),
        ("1D", 1.0, True),
        ("2iii", 1.0, True),
        ("2iv", 1.0, True),
        ("2i", math.sqrt(math.pi), False),
        ("2ii", 2.0672, False),
    ],
)
def test_normalization_audit(entry_id, expected, ok):
    record = crosscheck(entry_id)
    assert record.normalization == pytest.approx(expected, abs=2e-3)
    status = "ok" if ok else "flagged"
    assert any(note.startswith("normalization") and f"({status})" in note for note in record.notes)


def test_printed_phase_notes():
    notes = crosscheck("2i").notes
    assert any("undefined" in note for note in notes)
    assert any("printed phase deviates" in note for note in crosscheck("1C").notes)


def test_reduction_entries():
    unit, heavy = reduction_entries()
    assert (unit.id, heavy.id) == ("line-reduction", "line-reduction-unit-mass")

    x = np.array([-2.0, 0.5, 3.0])
    np.testing.assert_allclose(construct(unit.spec).mu.eval(x), 1.0)
    np.testing.assert_allclose(construct(heavy.spec).mu.eval(x), 1.0 / math.sqrt(2.0), rtol=1e-15)

    flat = construct(unit.spec)
    np.testing.assert_allclose(flat.g.eval(x), 1.0)
    np.testing.assert_allclose(flat.W.eval(x), 0.0, atol=1e-15)


@pytest.mark.parametrize("f", [None, scaled_tanh(0.5, 1.0), constant(0.3)])
def test_reductions_satisfy_construction_identities(f):
    for entry in reduction_entries(f):
        model = construct(entry.spec)
        assert check_consistency_ode(model).residual <= 1e-10
        assert check_f_formula(model).residual <= 1e-12
        assert not entry.has_closed_forms


def test_constant_mass_reduction():
    entry = constant_mass_reduction(ell=2)
    model = construct(entry.spec)
    assert model.ell_d == 2.0
    assert check_consistency_ode(model).passed
    assert crosscheck("constant-mass-reduction").passed


def test_line_reduction_ids():
    assert line_reduction(mass=0.5).id == "line-reduction"
    assert line_reduction(mass=1.0).id == "line-reduction-unit-mass"


@pytest.mark.parametrize(
    "alias,entry_id",
    [("fityo-reduction", "line-reduction"), ("ref14-reduction", "constant-mass-reduction")],
)
def test_published_reduction_ids_resolve(alias, entry_id):
    assert get_example(alias) is get_example(entry_id)
    assert crosscheck(alias).passed


def test_catalog_lookup():
    assert list_ids()[:8] == list(EXAMPLE_IDS)
    assert get_example("2iii") is get_example("2iii")
    summary = get_example("2i").summary()
    assert summary.decay == "sech" and summary.parity == "even" and summary.closed_forms
    assert summary.grid.mode == "full-line"
    with pytest.raises(ValidationException):
        get_example("3x")
    with pytest.raises(ValidationException):
        crosscheck("3x")


def test_relative_deviation_floor():
    assert relative_deviation(np.array([1e-3]), np.array([0.0])) == pytest.approx(1e-3)
    assert relative_deviation(np.array([101.0]), np.array([100.0])) == pytest.approx(1e-2)


@settings(max_examples=20, deadline=None)
@given(
    ell=st.integers(min_value=0, max_value=2),
    mass_scale=st.sampled_from([0.25, 0.5, 1.0, 2.0]),
    mass_family=st.sampled_from(["constant", "monomial", "sech_pow"]),
    rate=st.floats(min_value=0.5, max_value=2.0),
)
def test_randomized_specs_satisfy_construction_identities(ell, mass_scale, mass_family, rate):
    mass = {
        "constant": constant(mass_scale),
        "monomial": monomial(mass_scale, 2),
        "sech_pow": sech_pow(mass_scale, 2),
    }[mass_family]
    model = construct(GeneratorSpec(dimension=3, ell=ell, mass=mass, f=monomial(rate, 1)))
    assert check_consistency_ode(model).residual <= 1e-10
    assert check_f_formula(model).residual <= 1e-12
