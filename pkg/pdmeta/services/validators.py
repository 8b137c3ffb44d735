"""Validation helpers for user input."""

from __future__ import annotations

import math
import re
from fractions import Fraction
from typing import Any


FRACTION_PATTERN = re.compile(r"^\s*[+-]?\d+\s*/\s*[+-]?\d+\s*$")

FAMILY_ARITY: dict[str, tuple[int, int | None, int]] = {
    # family: (param count, arg count or None for "one or more", min args)
    "constant": (1, 0, 0),
    "monomial": (2, 0, 0),
    "gauss": (2, 0, 0),
    "scaled_tanh": (2, 0, 0),
    "sech_pow": (2, 0, 0),
    "sum": (0, None, 1),
    "product": (0, None, 1),
    "scale": (1, 1, 1),
    "shift": (1, 1, 1),
}


class ValidationException(ValueError):
    """Custom validation error for user-facing messages."""

    def __init__(self, message: str) -> None:
        super().__init__(message)
        self.message = message


def parse_parameter(raw: Any) -> float:
    """Parse a descriptor parameter given as a number or an exact fraction string."""

    if isinstance(raw, bool):
        raise ValidationException("Boolean is not a valid numeric parameter.")
    if isinstance(raw, (int, float)):
        value = float(raw)
    elif isinstance(raw, str):
        text = raw.strip()
        try:
            if FRACTION_PATTERN.fullmatch(text):
                value = float(Fraction(text.replace(" ", "")))
            else:
                value = float(text)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValidationException(f"Cannot parse parameter {raw!r}.") from exc
    else:
        raise ValidationException(f"Parameter {raw!r} is not numeric.")

    if not math.isfinite(value):
        raise ValidationException(f"Parameter {raw!r} is not finite.")
    return value


def validate_family(family: str, params: list[float], arg_count: int) -> None:
    """Check parameter and argument counts plus per-family constraints."""

    if family not in FAMILY_ARITY:
        known = ", ".join(sorted(FAMILY_ARITY))
        raise ValidationException(f"Unknown family {family!r}; expected one of: {known}.")

    n_params, n_args, min_args = FAMILY_ARITY[family]
    if len(params) != n_params:
        raise ValidationException(
            f"Family {family!r} takes {n_params} parameter(s), got {len(params)}."
        )
    if n_args is not None and arg_count != n_args:
        raise ValidationException(
            f"Family {family!r} takes {n_args} argument(s), got {arg_count}."
        )
    if arg_count < min_args:
        raise ValidationException(f"Family {family!r} needs at least {min_args} argument(s).")

    if family == "monomial" and not float(params[1]).is_integer():
        raise ValidationException("Monomial power must be an integer.")
    if family == "sech_pow":
        power = params[1]
        if not float(power).is_integer() or power < 1:
            raise ValidationException("sech_pow power must be a positive integer.")


def validate_positive(name: str, value: float) -> float:
    """Ensure a tolerance-like value is strictly positive and finite."""

    if value is None or not math.isfinite(value) or value <= 0:
        raise ValidationException(f"{name} must be a positive finite number, got {value!r}.")
    return float(value)


def validate_grid_bounds(r_min: float, r_max: float, n: int, mode: str) -> None:
    """Validate radial grid parameters."""

    if mode not in ("half-line", "full-line"):
        raise ValidationException(f"Grid mode must be 'half-line' or 'full-line', got {mode!r}.")
    if n < 16:
        raise ValidationException(f"Grid needs at least 16 nodes, got {n}.")
    if not (math.isfinite(r_min) and math.isfinite(r_max)) or r_min >= r_max:
        raise ValidationException(f"Grid bounds must satisfy r_min < r_max, got [{r_min}, {r_max}].")
    if mode == "half-line" and r_min <= 0:
        raise ValidationException(f"Half-line grids need r_min > 0, got {r_min}.")
    if mode == "full-line" and not math.isclose(r_min, -r_max, rel_tol=1e-12, abs_tol=1e-15):
        raise ValidationException(f"Full-line grids must be symmetric [-L, L], got [{r_min}, {r_max}].")
    if mode == "full-line" and n % 2:
        raise ValidationException(f"Full-line grids need an even node count so x = 0 is not a node, got {n}.")


def validate_dimension_and_ell(dimension: int, ell: int | None, parity: str | None) -> None:
    """Exactly one of ell/parity is set, according to the dimension."""

    if isinstance(dimension, bool) or not isinstance(dimension, int) or dimension < 1:
        raise ValidationException(f"Dimension must be an integer >= 1, got {dimension!r}.")

    if dimension == 1:
        if ell is not None:
            raise ValidationException("One-dimensional specs take a parity, not an angular momentum.")
        if parity not in ("even", "odd"):
            raise ValidationException("One-dimensional specs need parity 'even' or 'odd'.")
        return

    if parity is not None:
        raise ValidationException("Parity is only meaningful for dimension 1.")
    if ell is None or isinstance(ell, bool) or not isinstance(ell, int) or ell < 0:
        raise ValidationException(f"Angular momentum must be an integer >= 0, got {ell!r}.")
