"""Data schemas for spec files, reports and exported tables."""

from __future__ import annotations

import hashlib
import json
from typing import Any, Literal

from pydantic import BaseModel, Field, model_validator

from pdmeta.services.funcspace import RadialFunction
from pdmeta.services.generator import GeneratorSpec, Parity
from pdmeta.services.validators import validate_dimension_and_ell


class FunctionDescriptor(BaseModel):
    family: str
    params: list[float | str] = Field(default_factory=list)
    args: list["FunctionDescriptor"] = Field(default_factory=list)

    model_config = {"extra": "forbid"}

    @classmethod
    def from_function(cls, fun: RadialFunction) -> "FunctionDescriptor":
        return cls.model_validate(fun.to_descriptor())

    def to_function(self) -> RadialFunction:
        return RadialFunction.from_descriptor(self.model_dump())


class GeneratorSpecPayload(BaseModel):
    """JSON form of a generator spec.

    ``ell`` is used for dimension >= 2 and ``parity`` for dimension 1.
    """

    dimension: int
    ell: int | None = None
    parity: Literal["even", "odd"] | None = None
    beta: float = 0.0
    mass: FunctionDescriptor
    f: FunctionDescriptor
    g_scale: float = Field(default=1.0, gt=0)

    model_config = {"extra": "forbid"}

    @model_validator(mode="after")
    def _check_ell_or_parity(self) -> "GeneratorSpecPayload":
        validate_dimension_and_ell(self.dimension, self.ell, self.parity)
        return self

    @classmethod
    def from_spec(cls, spec: GeneratorSpec) -> "GeneratorSpecPayload":
        return cls(
            dimension=spec.dimension,
            ell=spec.ell,
            parity=spec.parity.value if spec.parity is not None else None,
            beta=spec.beta,
            mass=FunctionDescriptor.from_function(spec.mass),
            f=FunctionDescriptor.from_function(spec.f),
            g_scale=spec.g_scale,
        )

    def to_spec(self) -> GeneratorSpec:
        return GeneratorSpec(
            dimension=self.dimension,
            ell=self.ell,
            parity=Parity(self.parity) if self.parity is not None else None,
            beta=self.beta,
            mass=self.mass.to_function(),
            f=self.f.to_function(),
            g_scale=self.g_scale,
        )

    def canonical_json(self) -> str:
        data = self.model_dump(mode="json", exclude_none=True)
        if data.get("g_scale") == 1.0:
            data.pop("g_scale")
        return json.dumps(data, sort_keys=True, separators=(",", ":"))


def spec_fingerprint(spec: GeneratorSpec) -> str:
    """First 16 hex digits of the sha256 of the canonical spec JSON."""

    canonical = GeneratorSpecPayload.from_spec(spec).canonical_json()
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


class GridSummary(BaseModel):
    r_min: float
    r_max: float
    n: int
    h: float
    mode: Literal["half-line", "full-line"]


class CheckRecord(BaseModel):
    name: str
    residual: float
    threshold: float | None = None
    passed: bool = Field(alias="pass")
    report_only: bool = False
    grid: GridSummary | None = None
    details: dict[str, Any] = Field(default_factory=dict)

    model_config = {"populate_by_name": True}


class VerificationReportPayload(BaseModel):
    model: str
    grid: GridSummary
    checks: list[CheckRecord]
    notes: list[str] = Field(default_factory=list)
    metadata: dict[str, Any] = Field(default_factory=dict)

    model_config = {"populate_by_name": True}

    def dump_json(self) -> str:
        return self.model_dump_json(by_alias=True, indent=2)


class CrosscheckRecord(BaseModel):
    entry: str
    deviations: dict[str, float]
    tolerance: float
    passed: bool = Field(alias="pass")
    normalization: float | None = None
    notes: list[str] = Field(default_factory=list)

    model_config = {"populate_by_name": True}


class FieldTable(BaseModel):
    """Sampled model fields, one list per column."""

    model: str
    beta: float
    grid: GridSummary
    columns: dict[str, list[float]]


class SpectrumSummary(BaseModel):
    n: int
    counts: dict[str, int]
    unpaired_fraction: float
    tol: float
    trace_error: float
    eigenvalues: list[tuple[float, float, str]] = Field(default_factory=list)


class OperatorMatrixPayload(BaseModel):
    operator: str
    grid: GridSummary
    real: list[list[float]]
    imag: list[list[float]]


class CatalogEntrySummary(BaseModel):
    id: str
    title: str
    dimension: int
    ell: int | None = None
    parity: Literal["even", "odd"] | None = None
    decay: Literal["gauss", "sech"] | None = None
    grid: GridSummary
    psi_constant: float | None = None
    closed_forms: bool
    notes: list[str] = Field(default_factory=list)
