"""Adaptive Simpson quadrature and a cumulative antiderivative cache."""

from __future__ import annotations

import threading
from collections.abc import Callable, Hashable
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from pdmeta.logging import get_logger


logger = get_logger(__name__)

Integrand = Callable[[np.ndarray], np.ndarray]

EPS = float(np.finfo(float).eps)
# Breadth-first refinement doubles the active set per level; stop well before memory does.
MAX_ACTIVE_INTERVALS = 1 << 20


class QuadratureAccuracyError(ArithmeticError):
    """Quadrature did not reach the requested tolerance within the depth cap."""

    def __init__(self, message: str, estimate: float, error_bound: float) -> None:
        super().__init__(message)
        self.message = message
        self.estimate = estimate
        self.error_bound = error_bound


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error: float


def integrate_segments(
    f: Integrand,
    starts: np.ndarray,
    ends: np.ndarray,
    tols: np.ndarray | float,
    max_depth: int = 50,
) -> tuple[np.ndarray, np.ndarray]:
    """Adaptive Simpson's rule over many segments at once.

    Every segment is refined breadth-first: all unconverged intervals of a
    level are evaluated in a single call of ``f``. Children receive half of
    the parent tolerance and accepted intervals carry the Richardson term
    ``(S_left + S_right - S_whole) / 15``. Segments may run backwards
    (``start > end``), giving the signed integral.

    Returns:
        Tuple of (integral values, error estimates), one entry per segment.

    Raises:
        QuadratureAccuracyError: if a segment exhausts the depth cap with an
            error estimate above its tolerance, or the integrand is not finite.
    """
    a = np.atleast_1d(np.asarray(starts, dtype=float)).ravel()
    b = np.atleast_1d(np.asarray(ends, dtype=float)).ravel()
    seg_tol = np.broadcast_to(np.asarray(tols, dtype=float), a.shape).copy()
    n_segments = a.size

    values = np.zeros(n_segments)
    errors = np.zeros(n_segments)
    exhausted = np.zeros(n_segments, dtype=bool)
    if n_segments == 0:
        return values, errors

    m = 0.5 * (a + b)
    fa, fm, fb = np.split(np.asarray(f(np.concatenate([a, m, b])), dtype=float), 3)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    owner = np.arange(n_segments)
    tol = seg_tol.copy()
    depth = 0

    while owner.size:
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm, frm = np.split(np.asarray(f(np.concatenate([lm, rm])), dtype=float), 2)

        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        delta = left + right - whole

        if not np.all(np.isfinite(delta)):
            bad = int(np.argmin(np.isfinite(delta)))
            raise QuadratureAccuracyError(
                f"Integrand is not finite on [{a[bad]}, {b[bad]}]",
                estimate=float("nan"),
                error_bound=float("inf"),
            )

        rounding_floor = 64.0 * EPS * (np.abs(left) + np.abs(right))
        converged = np.abs(delta) <= 15.0 * np.maximum(tol, rounding_floor)
        too_narrow = np.abs(b - a) <= 8.0 * EPS * np.maximum(np.abs(a), np.abs(b))
        stop = converged | too_narrow | (depth >= max_depth)
        if 2 * int(np.count_nonzero(~stop)) > MAX_ACTIVE_INTERVALS:
            stop[:] = True

        np.add.at(values, owner[stop], (left + right + delta / 15.0)[stop])
        np.add.at(errors, owner[stop], np.abs(delta[stop]) / 15.0)
        exhausted[owner[stop & ~converged]] = True

        keep = ~stop
        if not keep.any():
            break

        a, m, b = (
            np.concatenate([a[keep], m[keep]]),
            np.concatenate([lm[keep], rm[keep]]),
            np.concatenate([m[keep], b[keep]]),
        )
        fa, fm, fb = (
            np.concatenate([fa[keep], fm[keep]]),
            np.concatenate([flm[keep], frm[keep]]),
            np.concatenate([fm[keep], fb[keep]]),
        )
        whole = np.concatenate([left[keep], right[keep]])
        tol = np.concatenate([tol[keep], tol[keep]]) / 2.0
        owner = np.concatenate([owner[keep], owner[keep]])
        depth += 1

    failed = exhausted & (errors > seg_tol)
    if failed.any():
        i = int(np.argmax(failed))
        logger.warning(
            "quadrature_depth_exhausted",
            segment=i,
            estimate=float(values[i]),
            error_bound=float(errors[i]),
            tol=float(seg_tol[i]),
        )
        raise QuadratureAccuracyError(
            f"Adaptive Simpson did not converge within depth {max_depth}",
            estimate=float(values[i]),
            error_bound=float(errors[i]),
        )

    return values, errors


def integrate_adaptive_simpson(
    f: Integrand,
    a: float,
    b: float,
    tol: float = 1e-12,
    max_depth: int = 50,
) -> QuadratureResult:
    """Definite integral of a vectorized integrand with absolute error <= tol."""

    if a == b:
        return QuadratureResult(0.0, 0.0)
    values, errors = integrate_segments(f, np.array([a]), np.array([b]), tol, max_depth)
    return QuadratureResult(float(values[0]), float(errors[0]))


@dataclass
class _Knots:
    points: np.ndarray
    values: np.ndarray
    errors: np.ndarray


class AntiderivativeCache:
    """Cumulative integrals from a fixed lower limit, cached per (integrand, lower).

    Every evaluated point becomes a knot. A query integrates only the
    segments between a new point and its neighbour towards ``lower``, so
    repeated evaluation on overlapping point sets costs a few short
    segments instead of full integrals. Internally synchronized.
    """

    def __init__(self, max_knots: int = 250_000) -> None:
        self._entries: dict[tuple[Hashable, float], _Knots] = {}
        self._lock = threading.RLock()
        self._max_knots = max_knots

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()

    def __len__(self) -> int:
        return len(self._entries)

    def integral(
        self,
        key: Hashable,
        f: Integrand,
        lower: float,
        points: np.ndarray | float,
        tol: float,
        max_depth: int = 50,
    ) -> tuple[np.ndarray, np.ndarray]:
        """Return (values, errors) of the integral of ``f`` from ``lower`` to each point."""

        pts = np.asarray(points, dtype=float)
        flat = pts.ravel()
        lower = float(lower)
        cache_key = (key, lower)

        with self._lock:
            entry = self._entries.get(cache_key)
            if (
                entry is None
                or float(entry.errors.max()) > tol / 2.0
                or entry.points.size > self._max_knots
            ):
                entry = _Knots(np.array([lower]), np.zeros(1), np.zeros(1))
            entry = self._extend(entry, f, lower, np.unique(flat), tol, max_depth)
            self._entries[cache_key] = entry

        idx = np.searchsorted(entry.points, flat)
        return entry.values[idx].reshape(pts.shape), entry.errors[idx].reshape(pts.shape)

    @staticmethod
    def _extend(
        entry: _Knots,
        f: Integrand,
        lower: float,
        queries: np.ndarray,
        tol: float,
        max_depth: int,
    ) -> _Knots:
        new = np.setdiff1d(queries, entry.points, assume_unique=True)
        if new.size == 0:
            return entry

        union = np.union1d(entry.points, new)
        known = np.isin(union, entry.points, assume_unique=True)
        stored = np.searchsorted(entry.points, union)
        stored = np.clip(stored, 0, entry.points.size - 1)
        base_values = np.where(known, entry.values[stored], 0.0)
        base_errors = np.where(known, entry.errors[stored], 0.0)

        span = max(union[-1] - lower, lower - union[0])
        budget = tol / 4.0
        values = np.zeros(union.size)
        errors = np.zeros(union.size)
        origin = int(np.searchsorted(union, lower))

        for idx in (np.arange(origin, union.size), np.arange(origin, -1, -1)):
            if idx.size < 2:
                values[idx] = base_values[idx]
                errors[idx] = base_errors[idx]
                continue
            seq = union[idx]
            need = ~known[idx][1:]
            prev, cur = seq[:-1], seq[1:]
            seg_tol = budget * np.abs(cur - prev) / span

            inc_v = np.zeros(seq.size)
            inc_e = np.zeros(seq.size)
            if need.any():
                seg_v, seg_e = integrate_segments(f, prev[need], cur[need], seg_tol[need], max_depth)
                inc_v[1:][need] = seg_v
                inc_e[1:][need] = seg_e

            is_known = known[idx]
            anchor = np.maximum.accumulate(np.where(is_known, np.arange(seq.size), 0))
            csum_v = np.cumsum(inc_v)
            csum_e = np.cumsum(inc_e)
            values[idx] = base_values[idx][anchor] + csum_v - csum_v[anchor]
            errors[idx] = base_errors[idx][anchor] + csum_e - csum_e[anchor]

        return _Knots(union, values, errors)


@lru_cache
def get_antiderivative_cache() -> AntiderivativeCache:
    """Return the process-wide antiderivative cache."""

    return AntiderivativeCache()
