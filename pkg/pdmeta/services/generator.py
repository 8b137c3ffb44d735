"""Construction of pseudo-Hermitian position-dependent-mass models from generating functions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from pdmeta.config import get_settings
from pdmeta.logging import get_logger
from pdmeta.services.funcspace import (
    Constant,
    Domain,
    DomainError,
    Monomial,
    RadialFunction,
    antiderivative,
    antiderivative_of,
    exp_of,
    power,
)
from pdmeta.services.quadrature import QuadratureAccuracyError
from pdmeta.services.validators import ValidationException, validate_dimension_and_ell


logger = get_logger(__name__)


class Parity(str, Enum):
    EVEN = "even"
    ODD = "odd"


class ConstructionError(RuntimeError):
    """A construction stage failed; ``cause`` holds the original error."""

    def __init__(self, stage: str, cause: Exception) -> None:
        message = getattr(cause, "message", str(cause))
        super().__init__(f"Construction failed at stage '{stage}': {message}")
        self.message = f"Construction failed at stage '{stage}': {message}"
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class GeneratorSpec:
    """User input defining one member of the model family.

    ``g_scale`` is an optional positive factor multiplying g; 1 reproduces
    the unit-constant choice.
    """

    dimension: int
    mass: RadialFunction
    f: RadialFunction
    beta: float = 0.0
    ell: int | None = None
    parity: Parity | None = None
    g_scale: float = 1.0

    def __post_init__(self) -> None:
        parity = Parity(self.parity) if self.parity is not None else None
        object.__setattr__(self, "parity", parity)
        validate_dimension_and_ell(self.dimension, self.ell, parity.value if parity else None)
        if not math.isfinite(self.beta):
            raise ValidationException(f"beta must be finite, got {self.beta!r}.")
        if not math.isfinite(self.g_scale) or self.g_scale <= 0:
            raise ValidationException(f"g_scale must be positive, got {self.g_scale!r}.")

    @property
    def domain(self) -> Domain:
        return Domain.FULL_LINE if self.dimension == 1 else Domain.HALF_LINE


@dataclass(frozen=True, eq=False)
class ConstructedModel:
    spec: GeneratorSpec
    ell_d: float
    mass: RadialFunction
    f: RadialFunction
    mu: RadialFunction
    g: RadialFunction
    F: RadialFunction
    G: RadialFunction
    W: RadialFunction
    V_tilde_minus_beta: RadialFunction
    psi_modulus: RadialFunction
    psi_phase: RadialFunction
    beta: float
    E: complex
    perturbation: dict[str, float] = field(default_factory=dict)

    @property
    def domain(self) -> Domain:
        return self.spec.domain

    @property
    def V_tilde(self) -> RadialFunction:
        return self.V_tilde_minus_beta + self.beta

    def psi(self, r: np.ndarray) -> np.ndarray:
        """Complex eigenfunction modulus * exp(i * phase), unnormalized."""

        return self.psi_modulus.eval(r) * np.exp(1j * self.psi_phase.eval(r))


# ---------------------------------------------------------------------------
# Pipeline stages
# ---------------------------------------------------------------------------


def effective_ell(dimension: int, ell: int | None = None, parity: Parity | str | None = None) -> float:
    """Centrifugal parameter: ell + (d - 3)/2, or -1 / 0 for even / odd parity in 1D."""

    validate_dimension_and_ell(dimension, ell, Parity(parity).value if parity is not None else None)
    if dimension == 1:
        return -1.0 if Parity(parity) is Parity.EVEN else 0.0
    return ell + (dimension - 3) / 2.0


def probe_points(domain: Domain, count: int | None = None) -> np.ndarray:
    """Log-spaced analytic probe set; mirrored about 0 on the full line."""

    settings = get_settings()
    count = count or settings.probe_count
    if domain is Domain.HALF_LINE:
        return np.geomspace(settings.probe_min, settings.probe_max, count)
    half = np.geomspace(settings.probe_min, settings.probe_max, count // 2)
    return np.concatenate([-half[::-1], half])


def mu_from_mass(m: RadialFunction, probes: np.ndarray | None = None) -> RadialFunction:
    """mu = sqrt(1 / (2 m)); the mass must be positive on the probe set."""

    points = probe_points(m.domain) if probes is None else probes
    values = np.atleast_1d(m.eval(points))
    if np.any(values <= 0.0):
        bad = np.asarray(points)[values <= 0.0]
        raise DomainError(f"Mass is not positive at r = {bad[0]!r}.", points=bad[:5].tolist())

    if isinstance(m.node, Constant):
        return RadialFunction(Constant(math.sqrt(1.0 / (2.0 * m.node.value))), m.domain)
    return 2.0**-0.5 * power(m, -0.5)


def _radial_power(exponent: float, domain: Domain) -> RadialFunction:
    if float(exponent).is_integer():
        return RadialFunction(Monomial(1.0, int(exponent)), domain)
    return power(RadialFunction(Monomial(1.0, 1), domain), exponent)


def build_g(f: RadialFunction, ell_d: float, g_scale: float = 1.0) -> RadialFunction:
    """g = r^(2(ell_d + 1)) * exp(-2 * integral_0^r f)."""

    order = 2.0 * (ell_d + 1.0)
    integral = antiderivative_of(f, 0.0)
    return g_scale * _radial_power(order, f.domain) * exp_of(-2.0 * integral)


def build_W(g: RadialFunction, mu: RadialFunction) -> RadialFunction:
    """W = -2 mu (g mu)'."""

    return -2.0 * mu * (g * mu).derivative()


def build_V_tilde(
    f: RadialFunction, g: RadialFunction, mu: RadialFunction, ell_d: float
) -> RadialFunction:
    """Effective real potential minus beta, summed term by term."""

    L = ell_d + 1.0
    domain = mu.domain
    inv_r = RadialFunction(Monomial(1.0, -1), domain)
    inv_r2 = RadialFunction(Monomial(1.0, -2), domain)
    dmu = mu.derivative()

    centrifugal = (L - 1.0) * L * mu * mu * inv_r2
    mass_gradient = 2.0 * L * mu * dmu * inv_r
    generators = mu * mu * (f * f - g * g)
    cross = -2.0 * L * f * mu * mu * inv_r
    drift = -2.0 * dmu * mu * f
    slope = -1.0 * mu * mu * f.derivative()
    return centrifugal + mass_gradient + generators + cross + drift + slope


def build_psi(
    f: RadialFunction, g: RadialFunction, ell_d: float
) -> tuple[RadialFunction, RadialFunction]:
    """Return (modulus, phase) of r^(ell_d+1) exp(-integral_0^r (f + i g))."""

    L = ell_d + 1.0
    modulus = exp_of(-1.0 * antiderivative_of(f, 0.0))
    if L != 0.0:
        modulus = _radial_power(L, f.domain) * modulus
    phase = -1.0 * antiderivative_of(g, 0.0)
    return modulus, phase


def build_F(f: RadialFunction, mu: RadialFunction, ell_d: float) -> RadialFunction:
    """F = (-(ell_d + 1)/r + f) mu."""

    L = ell_d + 1.0
    if L == 0.0:
        return f * mu
    inv_r = RadialFunction(Monomial(1.0, -1), f.domain)
    return (f - L * inv_r) * mu


def physical_potential(model: ConstructedModel) -> RadialFunction:
    """Potential of the original d-dimensional operator: V_tilde without centrifugal and mass-gradient terms."""

    domain = model.domain
    d = model.spec.dimension
    ell_d = model.ell_d
    inv_r = RadialFunction(Monomial(1.0, -1), domain)
    inv_r2 = RadialFunction(Monomial(1.0, -2), domain)
    mu, dmu = model.mu, model.mu.derivative()
    centrifugal = ell_d * (ell_d + 1.0) * mu * mu * inv_r2
    mass_gradient = float(d - 1) * mu * dmu * inv_r
    return model.V_tilde - centrifugal - mass_gradient


def potential_from_intertwiner(model: ConstructedModel) -> RadialFunction:
    """F^2 - G^2 - mu' F - mu F' + beta, the real potential the intertwiner fixes."""

    F, G, mu = model.F, model.G, model.mu
    return F * F - G * G - mu.derivative() * F - mu * F.derivative() + model.beta


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------


_STAGE_ERRORS = (DomainError, QuadratureAccuracyError, ValidationException, ZeroDivisionError)


def _stage(name: str, build, probes: np.ndarray):
    try:
        fun = build()
        if isinstance(fun, tuple):
            for part in fun:
                part.eval(probes)
        else:
            fun.eval(probes)
        return fun
    except _STAGE_ERRORS as exc:
        logger.error("construction_stage_failed", stage=name, error=getattr(exc, "message", str(exc)))
        raise ConstructionError(name, exc) from exc


def construct(spec: GeneratorSpec) -> ConstructedModel:
    """Run the full pipeline; every field is probed once so failures name their stage."""

    domain = spec.domain
    probes = probe_points(domain)
    mass = spec.mass.on(domain)
    f = spec.f.on(domain)

    try:
        ell_d = effective_ell(spec.dimension, spec.ell, spec.parity)
    except ValidationException as exc:
        raise ConstructionError("ell_d", exc) from exc

    mu = _stage("mu", lambda: mu_from_mass(mass, probes), probes)
    g = _stage("g", lambda: build_g(f, ell_d, spec.g_scale), probes)
    F = _stage("F", lambda: build_F(f, mu, ell_d), probes)
    G = _stage("G", lambda: g * mu, probes)
    W = _stage("W", lambda: build_W(g, mu), probes)
    V = _stage("V_tilde", lambda: build_V_tilde(f, g, mu, ell_d), probes)
    modulus, phase = _stage("psi", lambda: build_psi(f, g, ell_d), probes)

    model = ConstructedModel(
        spec=spec,
        ell_d=ell_d,
        mass=mass,
        f=f,
        mu=mu,
        g=g,
        F=F,
        G=G,
        W=W,
        V_tilde_minus_beta=V,
        psi_modulus=modulus,
        psi_phase=phase,
        beta=float(spec.beta),
        E=complex(spec.beta, 0.0),
    )
    logger.info(
        "model_constructed",
        dimension=spec.dimension,
        ell_d=ell_d,
        beta=model.beta,
        domain=domain.value,
    )
    return model


def perturb_model(model: ConstructedModel, W_shift: float = 0.0, F_shift: float = 0.0) -> ConstructedModel:
    """Copy of ``model`` with constants added to W and F; psi and g stay unperturbed."""

    if W_shift == 0.0 and F_shift == 0.0:
        return model
    logger.warning("model_perturbed", W_shift=W_shift, F_shift=F_shift)
    return replace(
        model,
        W=model.W + W_shift,
        F=model.F + F_shift,
        perturbation={"W_shift": float(W_shift), "F_shift": float(F_shift)},
    )


def normalize_psi(model: ConstructedModel, r_min: float, r_max: float) -> float:
    """Return the L2 norm of psi over [r_min, r_max]; divide sampled psi by it to normalize."""

    density = model.psi_modulus * model.psi_modulus
    return math.sqrt(antiderivative(density, r_min, r_max).value)
