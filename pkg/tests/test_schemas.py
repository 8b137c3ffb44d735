import json
from dataclasses import replace

import pytest
from pydantic import ValidationError

from pdmeta.schemas import CheckRecord, FunctionDescriptor, GeneratorSpecPayload, spec_fingerprint
from pdmeta.services.funcspace import monomial, scaled_tanh, sech_pow, sum_of
from pdmeta.services.generator import GeneratorSpec, Parity
from pdmeta.services.validators import ValidationException


def test_spec_payload_round_trip(example_1a_spec):
    payload = GeneratorSpecPayload.from_spec(example_1a_spec)
    restored = GeneratorSpecPayload.model_validate_json(payload.model_dump_json()).to_spec()
    assert spec_fingerprint(restored) == spec_fingerprint(example_1a_spec)
    assert restored.dimension == 3 and restored.ell == 0 and restored.parity is None


def test_canonical_json_is_sorted_and_drops_unit_scale(example_1a_spec):
    data = json.loads(GeneratorSpecPayload.from_spec(example_1a_spec).canonical_json())
    assert "g_scale" not in data and "parity" not in data
    assert list(data) == sorted(data)

    scaled = GeneratorSpecPayload.from_spec(replace(example_1a_spec, g_scale=2.0))
    assert json.loads(scaled.canonical_json())["g_scale"] == 2.0


def test_fingerprint_tracks_spec_content(example_1a_spec):
    assert spec_fingerprint(example_1a_spec) == spec_fingerprint(replace(example_1a_spec))
    assert spec_fingerprint(example_1a_spec) != spec_fingerprint(replace(example_1a_spec, beta=1.0))
    assert len(spec_fingerprint(example_1a_spec)) == 16


def test_parity_payload():
    spec = GeneratorSpec(dimension=1, parity=Parity.ODD, mass=sech_pow(0.5, 2), f=scaled_tanh(0.5, 1.0))
    payload = GeneratorSpecPayload.from_spec(spec)
    assert payload.parity == "odd" and payload.ell is None
    assert payload.to_spec().parity is Parity.ODD


def test_nested_descriptor():
    fun = sum_of(monomial(1.0, 1), scaled_tanh(0.5, 2.0))
    descriptor = FunctionDescriptor.from_function(fun)
    assert descriptor.family == "sum" and len(descriptor.args) == 2
    assert descriptor.to_function().eval(1.5) == pytest.approx(fun.eval(1.5), rel=1e-15)


def test_fractional_parameters_are_accepted():
    payload = GeneratorSpecPayload.model_validate(
        {
            "dimension": 1,
            "parity": "even",
            "mass": {"family": "sech_pow", "params": ["1/2", 2]},
            "f": {"family": "scaled_tanh", "params": ["1/2", 1]},
        }
    )
    assert payload.to_spec().mass.eval(0.0) == pytest.approx(0.5)


@pytest.mark.parametrize(
    "data",
    [
        {"dimension": 3, "mass": {"family": "constant", "params": [0.5]}, "f": {"family": "constant", "params": [0]}},
        {
            "dimension": 3,
            "ell": 0,
            "mass": {"family": "constant", "params": [0.5]},
            "f": {"family": "constant", "params": [0]},
            "g_scale": 0,
        },
        {
            "dimension": 3,
            "ell": 0,
            "mass": {"family": "constant", "params": [0.5], "extra": 1},
            "f": {"family": "constant", "params": [0]},
        },
        {"dimension": 1, "parity": "both", "mass": {"family": "constant"}, "f": {"family": "constant"}},
    ],
)
def test_invalid_spec_payloads(data):
    with pytest.raises((ValidationError, ValidationException)):
        GeneratorSpecPayload.model_validate(data)


def test_check_record_serializes_pass_alias():
    record = CheckRecord(name="annihilation", residual=1e-3, threshold=5e-3, passed=True)
    data = json.loads(record.model_dump_json(by_alias=True))
    assert data["pass"] is True
    assert CheckRecord.model_validate(data) == record
