"""Algebra of real functions of one variable with exact derivatives.

Functions are immutable expression trees. Each node knows its value and
builds its own derivative node symbolically, so first and second
derivatives come from closed forms rather than finite differences.
Integrals are evaluated numerically by adaptive quadrature.
"""

from __future__ import annotations

import math
from collections.abc import Iterator, Mapping
from dataclasses import dataclass
from enum import Enum
from typing import Any, Union

import numpy as np

from pdmeta.config import get_settings
from pdmeta.services.quadrature import (
    QuadratureResult,
    get_antiderivative_cache,
)
from pdmeta.services.validators import ValidationException, parse_parameter, validate_family


ArrayLike = Union[float, np.ndarray]


class Domain(str, Enum):
    HALF_LINE = "half-line"
    FULL_LINE = "full-line"


class DomainError(ValueError):
    """Evaluation outside the domain of a function."""

    def __init__(self, message: str, points: list[float] | None = None) -> None:
        super().__init__(message)
        self.message = message
        self.points = points or []


# ---------------------------------------------------------------------------
# Expression tree
# ---------------------------------------------------------------------------


class Node:
    """Base class of expression tree nodes."""

    family: str = ""

    @property
    def children(self) -> tuple["Node", ...]:
        return ()

    def evaluate(self, r: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _derivative(self) -> "Node":
        raise NotImplementedError

    def derivative(self) -> "Node":
        cached = self.__dict__.get("_cached_derivative")
        if cached is None:
            cached = self._derivative()
            object.__setattr__(self, "_cached_derivative", cached)
        return cached

    def invalid(self, r: np.ndarray) -> np.ndarray:
        """Mask of points where the node cannot be evaluated."""

        mask = np.zeros(r.shape, dtype=bool)
        for child in self.children:
            mask |= child.invalid(r)
        return mask

    def to_descriptor(self) -> dict[str, Any]:
        raise ValidationException(f"Internal node {type(self).__name__} has no descriptor form.")

    def walk(self) -> Iterator["Node"]:
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass(frozen=True)
class Constant(Node):
    value: float
    family = "constant"

    def evaluate(self, r: np.ndarray) -> np.ndarray:
        return np.full(r.shape, self.value, dtype=float)

    def _derivative(self) -> Node:
        return ZERO

    def to_descriptor(self) -> dict[str, Any]:
        return {"family": "constant", "params": [self.value], "args": []}


@dataclass(frozen=True)
class Monomial(Node):
    coeff: float
    power: int
    family = "monomial"

    def evaluate(self, r: np.ndarray) -> np.ndarray:
        if self.power == 0:
            return np.full(r.shape, self.coeff, dtype=float)
        return self.coeff * np.power(r, float(self.power))

    def invalid(self, r: np.ndarray) -> np.ndarray:
        if self.power < 0:
            return r == 0.0
        return np.zeros(r.shape, dtype=bool)

    def _derivative(self) -> Node:
        if self.power == 0 or self.coeff == 0.0:
            return ZERO
        if self.power == 1:
            return Constant(self.coeff)
        return Monomial(self.coeff * self.power, self.power - 1)

    def to_descriptor(self) -> dict[str, Any]:
        return {"family": "monomial", "params": [self.coeff, self.power], "args": []}


@dataclass(frozen=True)
class Gauss(Node):
    """coeff * exp(-rate * r**2)"""

    coeff: float
    rate: float
    family = "gauss"

    def evaluate(self, r: np.ndarray) -> np.ndarray:
        return self.coeff * np.exp(-self.rate * r * r)

    def _derivative(self) -> Node:
        return product_node(Monomial(-2.0 * self.rate * self.coeff, 1), Gauss(1.0, self.rate))

    def to_descriptor(self) -> dict[str, Any]:
        return {"family": "gauss", "params": [self.coeff, self.rate], "args": []}


@dataclass(frozen=True)
class ScaledTanh(Node):
    """coeff * tanh(rate * r)"""

    coeff: float
    rate: float
    family = "scaled_tanh"

    def evaluate(self, r: np.ndarray) -> np.ndarray:
        return self.coeff * np.tanh(self.rate * r)

    def _derivative(self) -> Node:
        return scale_node(self.coeff * self.rate, dilate_node(self.rate, SechPow(1.0, 2)))

    def to_descriptor(self) -> dict[str, Any]:
        return {"family": "scaled_tanh", "params": [self.coeff, self.rate], "args": []}


@dataclass(frozen=True)
class SechPow(Node):
    """coeff * sech(r)**power"""

    coeff: float
    power: int
    family = "sech_pow"

    def evaluate(self, r: np.ndarray) -> np.ndarray:
        t = np.exp(-np.abs(r))
        sech = 2.0 * t / (1.0 + t * t)
        return self.coeff * sech**self.power

    def _derivative(self) -> Node:
        return product_node(SechPow(-self.power * self.coeff, self.power), ScaledTanh(1.0, 1.0))

    def to_descriptor(self) -> dict[str, Any]:
        return {"family": "sech_pow", "params": [self.coeff, self.power], "args": []}


@dataclass(frozen=True)
class Sum(Node):
    terms: tuple[Node, ...]
    family = "sum"

    @property
    def children(self) -> tuple[Node, ...]:
        return self.terms

    def evaluate(self, r: np.ndarray) -> np.ndarray:
        out = self.terms[0].evaluate(r)
        for term in self.terms[1:]:
            out = out + term.evaluate(r)
        return out

    def _derivative(self) -> Node:
        return sum_node(*(term.derivative() for term in self.terms))

    def to_descriptor(self) -> dict[str, Any]:
        return {"family": "sum", "params": [], "args": [t.to_descriptor() for t in self.terms]}


@dataclass(frozen=True)
class Product(Node):
    factors: tuple[Node, ...]
    family = "product"

    @property
    def children(self) -> tuple[Node, ...]:
        return self.factors

    def evaluate(self, r: np.ndarray) -> np.ndarray:
        out = self.factors[0].evaluate(r)
        for factor in self.factors[1:]:
            out = out * factor.evaluate(r)
        return out

    def _derivative(self) -> Node:
        terms = []
        for i, factor in enumerate(self.factors):
            rest = self.factors[:i] + self.factors[i + 1 :]
            terms.append(product_node(factor.derivative(), *rest))
        return sum_node(*terms)

    def to_descriptor(self) -> dict[str, Any]:
        return {"family": "product", "params": [], "args": [f.to_descriptor() for f in self.factors]}


@dataclass(frozen=True)
class Scale(Node):
    factor: float
    arg: Node
    family = "scale"

    @property
    def children(self) -> tuple[Node, ...]:
        return (self.arg,)

    def evaluate(self, r: np.ndarray) -> np.ndarray:
        return self.factor * self.arg.evaluate(r)

    def _derivative(self) -> Node:
        return scale_node(self.factor, self.arg.derivative())

    def to_descriptor(self) -> dict[str, Any]:
        return {"family": "scale", "params": [self.factor], "args": [self.arg.to_descriptor()]}


@dataclass(frozen=True)
class Shift(Node):
    """arg(r - offset)"""

    offset: float
    arg: Node
    family = "shift"

    @property
    def children(self) -> tuple[Node, ...]:
        return (self.arg,)

    def evaluate(self, r: np.ndarray) -> np.ndarray:
        return self.arg.evaluate(r - self.offset)

    def invalid(self, r: np.ndarray) -> np.ndarray:
        return self.arg.invalid(r - self.offset)

    def _derivative(self) -> Node:
        inner = self.arg.derivative()
        if isinstance(inner, Constant):
            return inner
        return Shift(self.offset, inner)

    def to_descriptor(self) -> dict[str, Any]:
        return {"family": "shift", "params": [self.offset], "args": [self.arg.to_descriptor()]}


# Internal nodes: reachable from the public helpers below, never from descriptors.


@dataclass(frozen=True)
class Dilate(Node):
    """arg(factor * r)"""

    factor: float
    arg: Node

    @property
    def children(self) -> tuple[Node, ...]:
        return (self.arg,)

    def evaluate(self, r: np.ndarray) -> np.ndarray:
        return self.arg.evaluate(self.factor * r)

    def invalid(self, r: np.ndarray) -> np.ndarray:
        return self.arg.invalid(self.factor * r)

    def _derivative(self) -> Node:
        return scale_node(self.factor, dilate_node(self.factor, self.arg.derivative()))


@dataclass(frozen=True)
class Power(Node):
    """base ** exponent for a real exponent"""

    base: Node
    exponent: float

    @property
    def children(self) -> tuple[Node, ...]:
        return (self.base,)

    def evaluate(self, r: np.ndarray) -> np.ndarray:
        return np.power(self.base.evaluate(r), self.exponent)

    def invalid(self, r: np.ndarray) -> np.ndarray:
        mask = self.base.invalid(r)
        with np.errstate(all="ignore"):
            values = self.base.evaluate(r)
        if not float(self.exponent).is_integer():
            mask |= values < 0.0
        if self.exponent < 0:
            mask |= values == 0.0
        return mask

    def _derivative(self) -> Node:
        return product_node(
            scale_node(self.exponent, self.base.derivative()),
            power_node(self.base, self.exponent - 1.0),
        )


@dataclass(frozen=True)
class Exp(Node):
    arg: Node

    @property
    def children(self) -> tuple[Node, ...]:
        return (self.arg,)

    def evaluate(self, r: np.ndarray) -> np.ndarray:
        return np.exp(self.arg.evaluate(r))

    def _derivative(self) -> Node:
        return product_node(self.arg.derivative(), self)


@dataclass(frozen=True)
class Antiderivative(Node):
    """Integral of ``integrand`` from ``lower`` to r, by cached adaptive quadrature."""

    integrand: Node
    lower: float
    tol: float

    @property
    def children(self) -> tuple[Node, ...]:
        return (self.integrand,)

    def evaluate(self, r: np.ndarray) -> np.ndarray:
        settings = get_settings()
        values, _ = get_antiderivative_cache().integral(
            self.integrand,
            _raw(self.integrand),
            self.lower,
            r,
            self.tol,
            settings.quad_max_depth,
        )
        return values

    def invalid(self, r: np.ndarray) -> np.ndarray:
        return np.zeros(r.shape, dtype=bool)

    def _derivative(self) -> Node:
        return self.integrand


ZERO = Constant(0.0)
ONE = Constant(1.0)


def _raw(node: Node):
    def f(x: np.ndarray) -> np.ndarray:
        with np.errstate(all="ignore"):
            return node.evaluate(np.asarray(x, dtype=float))

    return f


# ---------------------------------------------------------------------------
# Node builders with light constant folding
# ---------------------------------------------------------------------------


def scale_node(factor: float, node: Node) -> Node:
    factor = float(factor)
    if factor == 0.0:
        return ZERO
    if factor == 1.0:
        return node
    if isinstance(node, Constant):
        return Constant(factor * node.value)
    if isinstance(node, Scale):
        return scale_node(factor * node.factor, node.arg)
    if isinstance(node, Monomial):
        return Monomial(factor * node.coeff, node.power)
    return Scale(factor, node)


def sum_node(*nodes: Node) -> Node:
    flat: list[Node] = []
    constant = 0.0
    for node in nodes:
        parts = node.terms if isinstance(node, Sum) else (node,)
        for part in parts:
            if isinstance(part, Constant):
                constant += part.value
            else:
                flat.append(part)
    if constant != 0.0:
        flat.append(Constant(constant))
    if not flat:
        return ZERO
    if len(flat) == 1:
        return flat[0]
    return Sum(tuple(flat))


def product_node(*nodes: Node) -> Node:
    flat: list[Node] = []
    factor = 1.0
    for node in nodes:
        parts = node.factors if isinstance(node, Product) else (node,)
        for part in parts:
            if isinstance(part, Constant):
                factor *= part.value
            elif isinstance(part, Scale):
                factor *= part.factor
                flat.append(part.arg)
            else:
                flat.append(part)
    if factor == 0.0:
        return ZERO
    if not flat:
        return Constant(factor)
    if len(flat) == 1:
        return scale_node(factor, flat[0])
    return scale_node(factor, Product(tuple(flat)))


def power_node(base: Node, exponent: float) -> Node:
    exponent = float(exponent)
    if exponent == 0.0:
        return ONE
    if exponent == 1.0:
        return base
    if isinstance(base, Constant) and base.value > 0:
        return Constant(base.value**exponent)
    return Power(base, exponent)


def dilate_node(factor: float, node: Node) -> Node:
    if factor == 1.0 or isinstance(node, Constant):
        return node
    return Dilate(float(factor), node)


# ---------------------------------------------------------------------------
# Public function type
# ---------------------------------------------------------------------------


def _combine_domains(*domains: Domain) -> Domain:
    return Domain.HALF_LINE if Domain.HALF_LINE in domains else Domain.FULL_LINE


@dataclass(frozen=True)
class RadialFunction:
    """Evaluable real function of one variable on the half line or the full line."""

    node: Node
    domain: Domain = Domain.FULL_LINE

    # evaluation --------------------------------------------------------

    def eval(self, r: ArrayLike) -> ArrayLike:
        return self._checked(self.node, r)

    __call__ = eval

    def deriv(self, order: int, r: ArrayLike) -> ArrayLike:
        if order not in (1, 2):
            raise ValidationException(f"Derivative order must be 1 or 2, got {order}.")
        node = self.node.derivative()
        if order == 2:
            node = node.derivative()
        return self._checked(node, r, source=self.node)

    def derivative(self) -> "RadialFunction":
        return RadialFunction(self.node.derivative(), self.domain)

    def _checked(self, node: Node, r: ArrayLike, source: Node | None = None) -> ArrayLike:
        arr = np.asarray(r, dtype=float)
        scalar = arr.ndim == 0
        arr = np.atleast_1d(arr)

        if not np.all(np.isfinite(arr)):
            raise DomainError("Evaluation point is not finite.")
        if self.domain is Domain.HALF_LINE and np.any(arr <= 0.0):
            bad = arr[arr <= 0.0]
            raise DomainError(
                f"Point {bad[0]!r} lies outside the half line (0, inf).",
                points=bad[:5].tolist(),
            )
        invalid = node.invalid(arr)
        if source is not None:
            invalid |= source.invalid(arr)
        if invalid.any():
            bad = arr[invalid]
            raise DomainError(f"Function is singular at r = {bad[0]!r}.", points=bad[:5].tolist())

        with np.errstate(all="ignore"):
            out = np.asarray(node.evaluate(arr), dtype=float)
        if not np.all(np.isfinite(out)):
            bad = arr[~np.isfinite(out)]
            raise DomainError(f"Function is not finite at r = {bad[0]!r}.", points=bad[:5].tolist())
        return float(out[0]) if scalar else out

    # algebra -----------------------------------------------------------

    def _lift(self, other: "RadialFunction | float") -> "RadialFunction":
        if isinstance(other, RadialFunction):
            return other
        return RadialFunction(Constant(float(other)), Domain.FULL_LINE)

    def __add__(self, other: "RadialFunction | float") -> "RadialFunction":
        other = self._lift(other)
        return RadialFunction(sum_node(self.node, other.node), _combine_domains(self.domain, other.domain))

    __radd__ = __add__

    def __neg__(self) -> "RadialFunction":
        return RadialFunction(scale_node(-1.0, self.node), self.domain)

    def __sub__(self, other: "RadialFunction | float") -> "RadialFunction":
        return self + (-self._lift(other))

    def __rsub__(self, other: float) -> "RadialFunction":
        return self._lift(other) - self

    def __mul__(self, other: "RadialFunction | float") -> "RadialFunction":
        if not isinstance(other, RadialFunction):
            return RadialFunction(scale_node(float(other), self.node), self.domain)
        return RadialFunction(product_node(self.node, other.node), _combine_domains(self.domain, other.domain))

    __rmul__ = __mul__

    def __truediv__(self, other: "RadialFunction | float") -> "RadialFunction":
        if not isinstance(other, RadialFunction):
            return self * (1.0 / float(other))
        return self * power(other, -1.0)

    def on(self, domain: Domain) -> "RadialFunction":
        return RadialFunction(self.node, domain)

    # serialization -------------------------------------------------------

    def to_descriptor(self) -> dict[str, Any]:
        return self.node.to_descriptor()

    @classmethod
    def from_descriptor(
        cls, descriptor: Mapping[str, Any], domain: Domain = Domain.FULL_LINE
    ) -> "RadialFunction":
        return cls(node_from_descriptor(descriptor), domain)


def node_from_descriptor(descriptor: Mapping[str, Any]) -> Node:
    """Build a node tree from ``{"family", "params", "args"}`` records."""

    if not isinstance(descriptor, Mapping):
        raise ValidationException(f"Descriptor must be a mapping, got {type(descriptor).__name__}.")
    family = descriptor.get("family")
    raw_params = descriptor.get("params", []) or []
    raw_args = descriptor.get("args", []) or []
    if not isinstance(raw_params, (list, tuple)) or not isinstance(raw_args, (list, tuple)):
        raise ValidationException("Descriptor params and args must be lists.")

    params = [parse_parameter(p) for p in raw_params]
    validate_family(str(family), params, len(raw_args))
    args = [node_from_descriptor(a) for a in raw_args]

    if family == "constant":
        return Constant(params[0])
    if family == "monomial":
        return Monomial(params[0], int(params[1]))
    if family == "gauss":
        return Gauss(params[0], params[1])
    if family == "scaled_tanh":
        return ScaledTanh(params[0], params[1])
    if family == "sech_pow":
        return SechPow(params[0], int(params[1]))
    if family == "sum":
        return args[0] if len(args) == 1 else Sum(tuple(args))
    if family == "product":
        return args[0] if len(args) == 1 else Product(tuple(args))
    if family == "scale":
        return Scale(params[0], args[0])
    return Shift(params[0], args[0])


# ---------------------------------------------------------------------------
# Family constructors
# ---------------------------------------------------------------------------


def constant(value: float) -> RadialFunction:
    return RadialFunction(Constant(float(value)))


def monomial(coeff: float, power: int, domain: Domain = Domain.FULL_LINE) -> RadialFunction:
    if not float(power).is_integer():
        raise ValidationException("Monomial power must be an integer.")
    return RadialFunction(Monomial(float(coeff), int(power)), domain)


def gauss(coeff: float, rate: float) -> RadialFunction:
    return RadialFunction(Gauss(float(coeff), float(rate)))


def scaled_tanh(coeff: float, rate: float) -> RadialFunction:
    return RadialFunction(ScaledTanh(float(coeff), float(rate)))


def sech_pow(coeff: float, power: int) -> RadialFunction:
    if not float(power).is_integer() or power < 1:
        raise ValidationException("sech_pow power must be a positive integer.")
    return RadialFunction(SechPow(float(coeff), int(power)))


def sum_of(*funs: RadialFunction) -> RadialFunction:
    return RadialFunction(
        Sum(tuple(f.node for f in funs)) if len(funs) > 1 else funs[0].node,
        _combine_domains(*(f.domain for f in funs)),
    )


def product_of(*funs: RadialFunction) -> RadialFunction:
    return RadialFunction(
        Product(tuple(f.node for f in funs)) if len(funs) > 1 else funs[0].node,
        _combine_domains(*(f.domain for f in funs)),
    )


def scale(factor: float, fun: RadialFunction) -> RadialFunction:
    return RadialFunction(Scale(float(factor), fun.node), fun.domain)


def shift(offset: float, fun: RadialFunction) -> RadialFunction:
    return RadialFunction(Shift(float(offset), fun.node), fun.domain)


def power(fun: RadialFunction, exponent: float) -> RadialFunction:
    return RadialFunction(power_node(fun.node, exponent), fun.domain)


def exp_of(fun: RadialFunction) -> RadialFunction:
    return RadialFunction(Exp(fun.node), fun.domain)


def dilate(factor: float, fun: RadialFunction) -> RadialFunction:
    return RadialFunction(dilate_node(factor, fun.node), fun.domain)


def antiderivative_of(fun: RadialFunction, lower: float = 0.0, tol: float | None = None) -> RadialFunction:
    """Function r -> integral of ``fun`` from ``lower`` to r."""

    tol = get_settings().quad_tol if tol is None else tol
    return RadialFunction(Antiderivative(fun.node, float(lower), float(tol)), fun.domain)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def evaluate(fun: RadialFunction, r: ArrayLike) -> ArrayLike:
    return fun.eval(r)


def deriv(fun: RadialFunction, order: int, r: ArrayLike) -> ArrayLike:
    return fun.deriv(order, r)


def decay_cutoff(fun: RadialFunction) -> float:
    """Cutoff for an improper upper limit, chosen from the decaying family present."""

    settings = get_settings()
    families = {node.family for node in fun.node.walk()}
    if "gauss" in families:
        return settings.gauss_cutoff
    if "sech_pow" in families:
        return settings.sech_cutoff
    raise ValidationException(
        "Cannot choose an integration cutoff: no decaying family in the integrand; pass cutoff."
    )


def antiderivative(
    fun: RadialFunction,
    lower: float,
    upper: float,
    tol: float | None = None,
    cutoff: float | None = None,
) -> QuadratureResult:
    """Definite integral of ``fun`` over [lower, upper] with absolute error <= tol.

    An infinite upper limit is truncated at ``cutoff`` (or the decay-class
    default). Results are cached per (function, lower).
    """
    settings = get_settings()
    tol = settings.quad_tol if tol is None else tol
    if tol <= 0:
        raise ValidationException("Quadrature tolerance must be positive.")
    if math.isinf(upper):
        upper = (cutoff if cutoff is not None else decay_cutoff(fun)) * (1.0 if upper > 0 else -1.0)
    if upper == lower:
        return QuadratureResult(0.0, 0.0)

    values, errors = get_antiderivative_cache().integral(
        fun.node, _raw(fun.node), float(lower), np.array([float(upper)]), tol, settings.quad_max_depth
    )
    return QuadratureResult(float(values[0]), float(errors[0]))


def improper_integral(
    fun: RadialFunction,
    lower: float = 0.0,
    decay: str | None = None,
    cutoff: float | None = None,
    tol: float | None = None,
) -> QuadratureResult:
    """Integral of ``fun`` from ``lower`` to infinity, truncated at the decay cutoff.

    ``lower`` may be ``-inf`` for full-line integrals; the lower limit is then
    mirrored to minus the cutoff.
    """
    if cutoff is None:
        cutoff = get_settings().cutoff_for(decay) if decay is not None else decay_cutoff(fun)
    lo = -cutoff if math.isinf(lower) else lower
    if lo >= 0.0:
        return antiderivative(fun, lo, cutoff, tol)
    # Split at zero so the cached cumulative integral starts from the origin.
    left = antiderivative(fun, 0.0, lo, tol)
    right = antiderivative(fun, 0.0, cutoff, tol)
    return QuadratureResult(right.value - left.value, right.error + left.error)
