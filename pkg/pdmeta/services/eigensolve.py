"""Dense complex eigenvalues: Householder Hessenberg reduction and shifted QR."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt

from pdmeta.config import get_settings
from pdmeta.logging import get_logger
from pdmeta.services.discrete import DimensionMismatchError, check_size, max_row_sum


logger = get_logger(__name__)

EPS = float(np.finfo(float).eps)
INNER_PRODUCT_GUARD = 1e-300
EXCEPTIONAL_SHIFT_EVERY = 10


class EigenConvergenceError(ArithmeticError):
    """Iteration budget exhausted; ``block`` names the unconverged index range."""

    def __init__(self, message: str, block: tuple[int, int] | None = None, sweeps: int = 0) -> None:
        super().__init__(message)
        self.message = message
        self.block = block
        self.sweeps = sweeps


class SingularShiftError(ArithmeticError):
    def __init__(self, shift: complex) -> None:
        super().__init__(f"Shift {shift} is singular to working precision.")
        self.shift = shift


@dataclass(frozen=True)
class SpectrumClassification:
    eigenvalues: np.ndarray
    real_set: list[int]
    conjugate_pairs: list[tuple[int, int]]
    unpaired: list[int]
    tol: float
    scale: float = 1.0
    counts: dict[str, int] = field(default_factory=dict)

    @property
    def unpaired_fraction(self) -> float:
        n = len(self.eigenvalues)
        return len(self.unpaired) / n if n else 0.0


def _square(matrix: np.ndarray) -> np.ndarray:
    A = np.array(matrix, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatchError("Expected a square matrix.", (A.shape,))
    return A


def hessenberg(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reduce to upper Hessenberg form H = Q^H A Q with Householder reflections."""

    A = _square(matrix)
    n = A.shape[0]
    Q = np.eye(n, dtype=complex)

    for k in range(n - 2):
        x = A[k + 1 :, k].copy()
        if not np.any(x[1:]):
            continue
        alpha = np.linalg.norm(x)
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x
        v[0] += phase * alpha
        v /= np.linalg.norm(v)

        A[k + 1 :, k:] -= 2.0 * np.outer(v, v.conj() @ A[k + 1 :, k:])
        A[:, k + 1 :] -= 2.0 * np.outer(A[:, k + 1 :] @ v, v.conj())
        Q[:, k + 1 :] -= 2.0 * np.outer(Q[:, k + 1 :] @ v, v.conj())
        A[k + 2 :, k] = 0.0

    return A, Q


def _givens(a: complex, b: complex) -> tuple[float, complex]:
    """Rotation (c, s) with [[c, s], [-conj(s), c]] @ [a, b] = [r, 0]."""

    if b == 0:
        return 1.0, 0j
    if a == 0:
        return 0.0, 1.0 + 0j
    norm = float(np.hypot(abs(a), abs(b)))
    c = abs(a) / norm
    s = (a / abs(a)) * np.conj(b) / norm
    return c, s


def _eig2(block: np.ndarray) -> tuple[complex, complex]:
    a, b, c, d = block[0, 0], block[0, 1], block[1, 0], block[1, 1]
    mean = 0.5 * (a + d)
    disc = np.sqrt((0.5 * (a - d)) ** 2 + b * c)
    first = mean + disc if abs(mean + disc) >= abs(mean - disc) else mean - disc
    second = (a * d - b * c) / first if first != 0 else mean - disc
    return complex(first), complex(second)


def _wilkinson_shift(H: np.ndarray, hi: int) -> complex:
    first, second = _eig2(H[hi - 1 : hi + 1, hi - 1 : hi + 1])
    target = H[hi, hi]
    return first if abs(first - target) <= abs(second - target) else second


def _qr_sweep(H: np.ndarray, lo: int, hi: int, shift: complex) -> None:
    """One shifted QR step, RQ + shift, on the active block in place."""

    B = H[lo : hi + 1, lo : hi + 1]
    m = B.shape[0]
    idx = np.arange(m)
    B[idx, idx] -= shift

    rotations = []
    for k in range(m - 1):
        c, s = _givens(B[k, k], B[k + 1, k])
        x = B[k, k:].copy()
        y = B[k + 1, k:].copy()
        B[k, k:] = c * x + s * y
        B[k + 1, k:] = -np.conj(s) * x + c * y
        rotations.append((c, s))

    for k, (c, s) in enumerate(rotations):
        top = min(k + 2, m - 1) + 1
        x = B[:top, k].copy()
        y = B[:top, k + 1].copy()
        B[:top, k] = c * x + np.conj(s) * y
        B[:top, k + 1] = -s * x + c * y

    B[idx, idx] += shift


def qr_eigenvalues(
    matrix: np.ndarray,
    tol: float | None = None,
    max_sweeps: int | None = None,
) -> np.ndarray:
    """All eigenvalues by complex single-shift QR with deflation.

    Raises:
        EigenConvergenceError: if ``max_sweeps`` QR sweeps do not empty the active block.
    """
    settings = get_settings()
    A = _square(matrix)
    n = A.shape[0]
    check_size(n)
    tol = settings.qr_tol if tol is None else tol
    max_sweeps = settings.qr_sweeps_per_eigenvalue * n if max_sweeps is None else max_sweeps

    H, _ = hessenberg(A)
    scale = max_row_sum(H) or 1.0
    eigs = np.zeros(n, dtype=complex)
    hi = n - 1
    sweeps = 0
    stalled = 0

    while hi >= 0:
        if hi == 0:
            eigs[0] = H[0, 0]
            break

        lo = hi
        while lo > 0:
            local = abs(H[lo, lo]) + abs(H[lo - 1, lo - 1]) or scale
            if abs(H[lo, lo - 1]) <= tol * local:
                H[lo, lo - 1] = 0.0
                break
            lo -= 1

        if lo == hi:
            eigs[hi] = H[hi, hi]
            hi -= 1
            stalled = 0
            continue
        if lo == hi - 1:
            eigs[hi - 1], eigs[hi] = _eig2(H[hi - 1 : hi + 1, hi - 1 : hi + 1])
            hi -= 2
            stalled = 0
            continue

        if sweeps >= max_sweeps:
            logger.error("qr_not_converged", block=[lo, hi], sweeps=sweeps)
            raise EigenConvergenceError(
                f"QR iteration stalled on block [{lo}, {hi}] after {sweeps} sweeps",
                block=(lo, hi),
                sweeps=sweeps,
            )

        stalled += 1
        if stalled % EXCEPTIONAL_SHIFT_EVERY == 0:
            shift = H[hi, hi] + 0.75 * abs(H[hi, hi - 1])
        else:
            shift = _wilkinson_shift(H, hi)
        _qr_sweep(H, lo, hi, shift)
        sweeps += 1

    logger.debug("qr_converged", n=n, sweeps=sweeps)
    return eigs


def spectrum_classify(eigs: np.ndarray, tol: float | None = None) -> SpectrumClassification:
    """Greedy split into real values, conjugate pairs and unpaired outliers."""

    tol = get_settings().classify_tol if tol is None else tol
    lam = np.asarray(eigs, dtype=complex)
    scale = max(1.0, float(np.max(np.abs(lam)))) if lam.size else 1.0
    threshold = tol * scale

    real_set = [int(i) for i in np.flatnonzero(np.abs(lam.imag) <= threshold)]
    remaining = [int(i) for i in np.flatnonzero(np.abs(lam.imag) > threshold)]
    used: set[int] = set()
    pairs: list[tuple[int, int]] = []
    unpaired: list[int] = []

    for i in remaining:
        if i in used:
            continue
        used.add(i)
        candidates = [j for j in remaining if j not in used]
        if candidates:
            distances = np.abs(lam[i] - np.conj(lam[candidates]))
            best = int(np.argmin(distances))
            if distances[best] <= threshold:
                j = candidates[best]
                used.add(j)
                pairs.append((i, j))
                continue
        unpaired.append(i)

    return SpectrumClassification(
        eigenvalues=lam,
        real_set=real_set,
        conjugate_pairs=pairs,
        unpaired=unpaired,
        tol=tol,
        scale=scale,
        counts={"real": len(real_set), "pairs": len(pairs), "unpaired": len(unpaired)},
    )


def _factor_shifted(A: np.ndarray, lam: complex, scale: float):
    n = A.shape[0]
    for attempt in Retrying(
        stop=stop_after_attempt(4),
        retry=retry_if_exception_type(SingularShiftError),
        reraise=True,
    ):
        with attempt:
            k = attempt.retry_state.attempt_number - 1
            shift = lam + k * 64.0 * EPS * scale * (1.0 + 1.0j)
            lu, piv = lu_factor(A - shift * np.eye(n), check_finite=False)
            if np.any(np.diag(lu) == 0):
                logger.warning("eigenvector_reshift", attempt=k + 1, shift=str(shift))
                raise SingularShiftError(shift)
            return lu, piv
    raise EigenConvergenceError("Shift factorisation did not succeed.")


def eigenvector(
    matrix: np.ndarray,
    lam: complex,
    tol: float = 1e-8,
    max_iter: int = 50,
) -> np.ndarray:
    """Unit eigenvector for ``lam`` by inverse iteration, ||(A - lam I) v|| <= tol ||A|| ||v||."""

    A = _square(matrix)
    n = A.shape[0]
    check_size(n)
    scale = max_row_sum(A) or 1.0
    lu_piv = _factor_shifted(A, complex(lam), scale)

    rng = np.random.default_rng(20240101)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    for _ in range(max_iter):
        w = lu_solve(lu_piv, v, check_finite=False)
        v = w / np.linalg.norm(w)
        residual = np.linalg.norm(A @ v - lam * v)
        if residual <= tol * scale:
            return v

    raise EigenConvergenceError(
        f"Inverse iteration for lambda = {lam} did not reach residual {tol:g} * ||A||",
        sweeps=max_iter,
    )


def eta_orthogonality(
    eigs: np.ndarray,
    vectors: np.ndarray,
    eta: np.ndarray,
    separation: float = 1e-8,
) -> float:
    """Largest normalized eta inner product between eigenvectors whose eigenvalues are not conjugate-paired.

    ``vectors`` holds one eigenvector per column.
    """
    lam = np.asarray(eigs, dtype=complex)
    V = np.asarray(vectors, dtype=complex)
    gram = V.conj().T @ eta @ V
    norms = np.sqrt(np.abs(np.diag(gram)))
    ratio = np.abs(gram) / (np.outer(norms, norms) + INNER_PRODUCT_GUARD)
    separated = np.abs(np.conj(lam)[:, None] - lam[None, :]) > separation * max(1.0, float(np.max(np.abs(lam))))
    np.fill_diagonal(separated, False)
    return float(np.max(ratio[separated])) if separated.any() else 0.0
