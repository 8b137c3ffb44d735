"""Numerical residual checks of the operator identities behind a constructed model."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable

import numpy as np
from scipy.linalg import eigh

from pdmeta.config import get_settings
from pdmeta.logging import get_logger
from pdmeta.schemas import CheckRecord, GridSummary, VerificationReportPayload, spec_fingerprint
from pdmeta.services import discrete
from pdmeta.services.discrete import RadialGrid, interior_mask, refine_grid
from pdmeta.services.eigensolve import (
    eigenvector,
    eta_orthogonality,
    qr_eigenvalues,
    spectrum_classify,
)
from pdmeta.services.funcspace import Domain, DomainError, improper_integral
from pdmeta.services.generator import (
    ConstructedModel,
    GeneratorSpec,
    construct,
    perturb_model,
    potential_from_intertwiner,
    probe_points,
)


logger = get_logger(__name__)

TINY = 1e-300
RESOLVABLE = 1e-150
BUMP_CUTOFF = 12.0


@dataclass(frozen=True)
class GridThreshold:
    """threshold(h) = C * h**p * scale"""

    C: float
    p: float

    def __call__(self, h: float, scale: float = 1.0) -> float:
        return self.C * h**self.p * scale


GRID_THRESHOLDS: dict[str, GridThreshold] = {
    "annihilation": GridThreshold(200.0, 2.0),
    "eigen": GridThreshold(2000.0, 2.0),
    "intertwining": GridThreshold(30.0, 2.0),
    "eta_factorization": GridThreshold(4.0, 1.0),
}

ANALYTIC_TOLERANCES: dict[str, float] = {
    "consistency_ode": 1e-10,
    "f_formula": 1e-12,
    "g_ode": 1e-10,
    "psi_log_derivative": 1e-10,
    "potential_identity": 1e-10,
    "eta_hermitian": 0.0,
    "eta_psd": 1e-10,
}

NULL_OVERLAP_TARGET = 0.99
ORTHOGONALITY_TARGET = 1e-6


@dataclass
class CheckResult:
    name: str
    residual: float
    threshold: float | None
    passed: bool
    report_only: bool = False
    grid: RadialGrid | None = None
    details: dict = field(default_factory=dict)

    def to_record(self) -> CheckRecord:
        return CheckRecord(
            name=self.name,
            residual=self.residual,
            threshold=self.threshold,
            passed=self.passed,
            report_only=self.report_only,
            grid=GridSummary(**self.grid.summary()) if self.grid is not None else None,
            details=self.details,
        )


@dataclass
class VerificationReport:
    fingerprint: str
    grid: RadialGrid
    checks: list[CheckResult]
    notes: list[str] = field(default_factory=list)
    timestamp: str = ""

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks if not check.report_only)

    def check(self, name: str) -> CheckResult:
        for item in self.checks:
            if item.name == name:
                return item
        raise KeyError(name)

    def to_payload(self) -> VerificationReportPayload:
        return VerificationReportPayload(
            model=self.fingerprint,
            grid=GridSummary(**self.grid.summary()),
            checks=[check.to_record() for check in self.checks],
            notes=self.notes,
            metadata={"timestamp": self.timestamp, "passed": self.passed},
        )


@dataclass(frozen=True)
class TestBatch:
    """Unit-norm smooth bumps that vanish on the boundary margins."""

    __test__ = False

    vectors: np.ndarray
    centers: np.ndarray
    width: float

    @property
    def size(self) -> int:
        return self.vectors.shape[1]


def _window(grid: RadialGrid, margin: int | None = None) -> tuple[float, float]:
    mask = interior_mask(grid, margin)
    nodes = grid.nodes[mask]
    return float(nodes[0]), float(nodes[-1])


def make_batch(
    grid: RadialGrid,
    k: int | None = None,
    window: tuple[float, float] | None = None,
    margin: int | None = None,
) -> TestBatch:
    """Gaussian bumps with a slow phase, centred on distinct nodes of the window."""

    k = get_settings().batch_size if k is None else k
    lo, hi = window if window is not None else _window(grid, margin)
    width = (hi - lo) / 30.0
    targets = np.linspace(lo + BUMP_CUTOFF * width, hi - BUMP_CUTOFF * width, k)
    nodes = grid.nodes
    centers = nodes[np.unique(np.abs(nodes[None, :] - targets[:, None]).argmin(axis=1))]

    keep = interior_mask(grid, margin)
    vectors = np.zeros((grid.n, centers.size), dtype=complex)
    for j, c in enumerate(centers):
        x = (nodes - c) / width
        bump = np.exp(-0.5 * x * x + 1j * x)
        bump[(np.abs(x) > BUMP_CUTOFF) | ~keep] = 0.0
        vectors[:, j] = bump / np.linalg.norm(bump)
    return TestBatch(vectors=vectors, centers=centers, width=width)


def _relative_max(defect: np.ndarray, *terms: np.ndarray) -> float:
    scale = np.maximum.reduce([np.abs(t) for t in terms])
    return float(np.max(np.abs(defect) / np.maximum(scale, TINY)))


def _analytic(name: str, residual: float, details: dict | None = None) -> CheckResult:
    tol = ANALYTIC_TOLERANCES[name]
    return CheckResult(name, residual, tol, bool(residual <= tol), details=details or {})


# ---------------------------------------------------------------------------
# Analytic checks (probe set, no grid)
# ---------------------------------------------------------------------------


def _resolved(r: np.ndarray, *divisors: np.ndarray) -> np.ndarray:
    """Probe points where every divisor is representable; underflowed tails are dropped."""

    keep = np.logical_and.reduce([np.abs(d) > RESOLVABLE for d in divisors])
    if not keep.any():
        raise DomainError("Divisor underflows at every probe point.", points=[float(r[0]), float(r[-1])])
    return r[keep]


def check_consistency_ode(model: ConstructedModel, probes: np.ndarray | None = None) -> CheckResult:
    """Pointwise defect of the second-order equation linking F, G and mu, relative to its largest term.

    F^2 - mu'F - mu F' - (mu^2 G''/G - mu mu'')/2 + mu^4 ((G/mu)')^2 / (4 G^2) = 0
    """

    r = probe_points(model.domain) if probes is None else probes
    r = _resolved(r, model.G.eval(r))
    mu, dmu, ddmu = model.mu.eval(r), model.mu.deriv(1, r), model.mu.deriv(2, r)
    F, dF = model.F.eval(r), model.F.deriv(1, r)
    G, ddG = model.G.eval(r), model.G.deriv(2, r)
    d_ratio = (model.G / model.mu).deriv(1, r)
    mu2 = mu * mu

    terms = [
        F * F,
        -dmu * F,
        -mu * dF,
        -0.5 * mu2 * ddG / G,
        0.5 * mu * ddmu,
        mu2 * mu2 * d_ratio * d_ratio / (4.0 * G * G),
    ]
    return _analytic("consistency_ode", _relative_max(sum(terms), *terms))


def check_f_formula(model: ConstructedModel, probes: np.ndarray | None = None) -> CheckResult:
    """F = (mu' G - mu G') / (2G)."""

    r = probe_points(model.domain) if probes is None else probes
    r = _resolved(r, model.G.eval(r))
    mu, dmu = model.mu.eval(r), model.mu.deriv(1, r)
    G, dG = model.G.eval(r), model.G.deriv(1, r)
    F = model.F.eval(r)
    first = dmu / 2.0
    second = -mu * dG / (2.0 * G)
    return _analytic("f_formula", _relative_max(F - first - second, F, first, second))


def check_g_ode(model: ConstructedModel, probes: np.ndarray | None = None) -> CheckResult:
    r = probe_points(model.domain) if probes is None else probes
    r = _resolved(r, model.g.eval(r))
    log_slope = model.g.deriv(1, r) / model.g.eval(r)
    centrifugal = 2.0 * (model.ell_d + 1.0) / r
    f_term = 2.0 * model.f.eval(r)
    defect = log_slope - centrifugal + f_term
    return _analytic("g_ode", _relative_max(defect, log_slope, centrifugal, f_term))


def check_psi_log_derivative(model: ConstructedModel, probes: np.ndarray | None = None) -> CheckResult:
    r = probe_points(model.domain) if probes is None else probes
    r = _resolved(r, model.psi_modulus.eval(r))
    mu = model.mu.eval(r)
    modulus_slope = -model.psi_modulus.deriv(1, r) / model.psi_modulus.eval(r)
    F_over_mu = model.F.eval(r) / mu
    phase_slope = -model.psi_phase.deriv(1, r)
    G_over_mu = model.G.eval(r) / mu
    modulus_defect = _relative_max(modulus_slope - F_over_mu, modulus_slope, F_over_mu)
    phase_defect = _relative_max(phase_slope - G_over_mu, phase_slope, G_over_mu)
    return _analytic(
        "psi_log_derivative",
        max(modulus_defect, phase_defect),
        {"modulus": modulus_defect, "phase": phase_defect},
    )


def check_potential_identity(model: ConstructedModel, probes: np.ndarray | None = None) -> CheckResult:
    """V_tilde equals the potential fixed by the intertwiner, F^2 - G^2 - mu'F - mu F' + beta."""

    r = probe_points(model.domain) if probes is None else probes
    F, G = model.F.eval(r), model.G.eval(r)
    cross = model.mu.deriv(1, r) * F
    slope = model.mu.eval(r) * model.F.deriv(1, r)
    defect = model.V_tilde.eval(r) - potential_from_intertwiner(model).eval(r)
    beta = np.full_like(r, model.beta)
    return _analytic("potential_identity", _relative_max(defect, F * F, G * G, cross, slope, beta))


# ---------------------------------------------------------------------------
# Grid checks
# ---------------------------------------------------------------------------


def _grid_check(
    name: str,
    residual: float,
    grid: RadialGrid,
    scale: float = 1.0,
    details: dict | None = None,
) -> CheckResult:
    threshold = GRID_THRESHOLDS[name](grid.h, scale)
    return CheckResult(name, residual, threshold, bool(residual <= threshold), grid=grid, details=details or {})


def _psi_residual(
    operator, model: ConstructedModel, grid: RadialGrid, window: tuple[float, float] | None, shift: float = 0.0
) -> float:
    psi = discrete.sample_psi(model, grid)
    mask = interior_mask(grid, window=window)
    out = operator @ psi - shift * psi
    return discrete.vector_norm(out, mask) / max(discrete.vector_norm(psi, mask), TINY)


def check_annihilation(
    model: ConstructedModel, grid: RadialGrid, window: tuple[float, float] | None = None
) -> CheckResult:
    """||O psi|| / ||psi|| over interior nodes."""

    O = discrete.discretize_O(model, grid, sparse=True)
    return _grid_check("annihilation", _psi_residual(O, model, grid, window), grid)


def check_eigen(
    model: ConstructedModel, grid: RadialGrid, window: tuple[float, float] | None = None
) -> CheckResult:
    """||(H - beta) psi|| / ||psi|| over interior nodes."""

    H = discrete.discretize_H(model, grid, sparse=True)
    return _grid_check("eigen", _psi_residual(H, model, grid, window, shift=model.beta), grid)


def check_intertwining(
    model: ConstructedModel,
    grid: RadialGrid,
    batch: TestBatch | None = None,
) -> CheckResult:
    """max over the batch of ||(eta H - H^dagger eta) v|| / (||eta H v|| + ||H^dagger eta v||) on interior nodes."""

    batch = make_batch(grid) if batch is None else batch
    H = discrete.discretize_H(model, grid, sparse=True)
    eta = discrete.discretize_eta(model, grid, "factored", sparse=True)
    H_dagger = discrete.adjoint(H)
    mask = interior_mask(grid)

    residuals = []
    for v in batch.vectors.T:
        left = eta @ (H @ v)
        right = H_dagger @ (eta @ v)
        response = discrete.vector_norm(left, mask) + discrete.vector_norm(right, mask)
        residuals.append(discrete.vector_norm(left - right, mask) / max(response, TINY))
    # threshold in units of (h / bump width)^2
    return _grid_check(
        "intertwining",
        float(max(residuals)),
        grid,
        scale=batch.width**-2,
        details={"vectors": batch.size, "bump_width": batch.width},
    )


def check_eta_factorization(
    model: ConstructedModel,
    grid: RadialGrid,
    batch: TestBatch | None = None,
) -> CheckResult:
    """Direct second-order metric against adjoint(O) @ O, compared through their action on the batch."""

    batch = make_batch(grid) if batch is None else batch
    direct = discrete.discretize_eta(model, grid, "direct", sparse=True)
    factored = discrete.discretize_eta(model, grid, "factored", sparse=True)
    norm_eta = max(discrete.max_row_sum(factored), TINY)

    residuals, responses = [], []
    for v in batch.vectors.T:
        scale = norm_eta * np.linalg.norm(v)
        residuals.append(np.linalg.norm((direct - factored) @ v) / scale)
        responses.append(np.linalg.norm(factored @ v) / scale)
    rho = max(responses)
    return _grid_check(
        "eta_factorization", float(max(residuals)), grid, scale=rho, details={"response_scale": rho}
    )


def check_eta_hermitian(model: ConstructedModel, grid: RadialGrid) -> CheckResult:
    eta = discrete.discretize_eta(model, grid, "factored", sparse=True)
    diff = eta - discrete.adjoint(eta)
    residual = float(abs(diff).max()) if diff.nnz else 0.0
    return CheckResult(
        "eta_hermitian", residual, ANALYTIC_TOLERANCES["eta_hermitian"], residual == 0.0, grid=grid
    )


def _eta_min_eigenpair(model: ConstructedModel, grid: RadialGrid) -> tuple[float, np.ndarray, float]:
    eta = discrete.discretize_eta(model, grid, "factored")
    values, vectors = eigh(eta, subset_by_index=[0, 0])
    return float(values[0]), vectors[:, 0], discrete.max_row_sum(eta)


def check_eta_psd(model: ConstructedModel, grid: RadialGrid) -> CheckResult:
    """Smallest eigenvalue of the factored metric is nonnegative up to rounding."""

    lam_min, _, norm_eta = _eta_min_eigenpair(model, grid)
    residual = max(0.0, -lam_min) / max(norm_eta, TINY)
    tol = ANALYTIC_TOLERANCES["eta_psd"]
    return CheckResult(
        "eta_psd", residual, tol, bool(residual <= tol), grid=grid, details={"lambda_min": lam_min, "norm": norm_eta}
    )


def check_eta_null_overlap(model: ConstructedModel, grid: RadialGrid) -> CheckResult:
    """Report-only: |cos angle| between the metric's near-null vector and sampled psi."""

    lam_min, v, norm_eta = _eta_min_eigenpair(model, grid)
    psi = discrete.sample_psi(model, grid)
    overlap = abs(np.vdot(v, psi)) / max(np.linalg.norm(v) * np.linalg.norm(psi), TINY)
    return CheckResult(
        "eta_null_overlap",
        float(overlap),
        NULL_OVERLAP_TARGET,
        bool(overlap >= NULL_OVERLAP_TARGET),
        report_only=True,
        grid=grid,
        details={"lambda_min": lam_min, "relative_lambda_min": lam_min / max(norm_eta, TINY)},
    )


def check_eta_orthogonality(
    model: ConstructedModel,
    grid: RadialGrid,
    pairs: int | None = None,
) -> CheckResult:
    """Report-only: eta inner products between eigenvectors of non-conjugate eigenvalues.

    ``pairs`` = 0 uses every computed eigenpair, k > 0 the k selected by real part.
    """
    pairs = get_settings().orthogonality_pairs if pairs is None else pairs
    H = discrete.discretize_H(model, grid)
    eta = discrete.discretize_eta(model, grid, "factored")
    eigs = qr_eigenvalues(H)
    order = np.argsort(eigs.real)
    selected = eigs[order[:pairs] if pairs > 0 else order]
    vectors = np.column_stack([eigenvector(H, lam) for lam in selected])
    value = eta_orthogonality(selected, vectors, eta)
    return CheckResult(
        "eta_orthogonality",
        value,
        ORTHOGONALITY_TARGET,
        bool(value <= ORTHOGONALITY_TARGET),
        report_only=True,
        grid=grid,
        details={"eigenpairs": int(selected.size)},
    )


def check_normalization(
    model: ConstructedModel,
    constant: float,
    decay: str,
) -> CheckResult:
    """Report-only: integral of |c psi|^2 over the model domain with the given prefactor."""

    density = model.psi_modulus * model.psi_modulus
    lower = float("-inf") if model.domain is Domain.FULL_LINE else 0.0
    integral = improper_integral(density, lower, decay=decay).value
    value = constant * constant * integral
    ok = bool(abs(value - 1.0) <= 2e-3)
    if not ok:
        logger.warning("normalization_flagged", constant=constant, value=value)
    return CheckResult(
        "normalization",
        value,
        None,
        ok,
        report_only=True,
        details={"constant": constant, "integral": integral},
    )


def check_imaginary_potential(model: ConstructedModel, grid: RadialGrid) -> CheckResult:
    """Report-only: max |W| on the grid; zero means the constructed H is Hermitian."""

    peak = float(np.max(np.abs(discrete.sample_W(model, grid))))
    return CheckResult("max_abs_W", peak, None, True, report_only=True, grid=grid)


# ---------------------------------------------------------------------------
# Refinement
# ---------------------------------------------------------------------------


@dataclass
class RefinementStudy:
    name: str
    spacings: list[float]
    residuals: list[float]

    @property
    def orders(self) -> list[float]:
        return [
            math.log(r0 / r1) / math.log(h0 / h1)
            for (r0, r1), (h0, h1) in zip(
                zip(self.residuals, self.residuals[1:]), zip(self.spacings, self.spacings[1:])
            )
        ]

    @property
    def monotone(self) -> bool:
        return all(b < a for a, b in zip(self.residuals, self.residuals[1:]))


GRID_CHECKS: dict[str, Callable[..., CheckResult]] = {
    "annihilation": check_annihilation,
    "eigen": check_eigen,
    "intertwining": check_intertwining,
    "eta_factorization": check_eta_factorization,
}


def refinement_study(
    model: ConstructedModel,
    grid: RadialGrid,
    check: str,
    levels: int = 3,
) -> RefinementStudy:
    """Run a grid check on ``levels`` successively halved grids over the coarsest grid's interior."""

    grids = [grid]
    for _ in range(levels - 1):
        grids.append(refine_grid(grids[-1]))
    window = _window(grid)

    residuals = []
    for level in grids:
        if check in ("intertwining", "eta_factorization"):
            result = GRID_CHECKS[check](model, level, make_batch(level, window=window))
        else:
            result = GRID_CHECKS[check](model, level, window)
        residuals.append(result.residual)
    study = RefinementStudy(check, [g.h for g in grids], residuals)
    logger.info("refinement_study", check=check, residuals=residuals, orders=study.orders)
    return study


def unpaired_trend(model: ConstructedModel, grid: RadialGrid, levels: int = 3) -> list[float]:
    """Unpaired eigenvalue fraction of the discretized H on successively refined grids."""

    fractions = []
    level = grid
    for _ in range(levels):
        eigs = qr_eigenvalues(discrete.discretize_H(model, level))
        fractions.append(spectrum_classify(eigs).unpaired_fraction)
        level = refine_grid(level)
    return fractions


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReportOptions:
    perturb_W: float = 0.0
    perturb_F: float = 0.0
    batch_size: int | None = None
    metric_eigen: bool = True
    spectral: bool = False
    spectrum_grid: RadialGrid | None = None
    normalization_constant: float | None = None
    decay: str | None = None


def full_report(
    spec: GeneratorSpec,
    grid: RadialGrid,
    options: ReportOptions | None = None,
) -> VerificationReport:
    """Construct the model and run every enabled check; deterministic apart from the timestamp."""

    options = options or ReportOptions()
    model = construct(spec)
    model = perturb_model(model, W_shift=options.perturb_W, F_shift=options.perturb_F)
    batch = make_batch(grid, options.batch_size)

    checks = [
        check_consistency_ode(model),
        check_f_formula(model),
        check_g_ode(model),
        check_psi_log_derivative(model),
        check_potential_identity(model),
        check_annihilation(model, grid),
        check_eigen(model, grid),
        check_intertwining(model, grid, batch),
        check_eta_factorization(model, grid, batch),
        check_eta_hermitian(model, grid),
    ]
    if options.metric_eigen:
        checks.append(check_eta_psd(model, grid))
        checks.append(check_eta_null_overlap(model, grid))
    checks.append(check_imaginary_potential(model, grid))
    if options.normalization_constant is not None and options.decay is not None:
        checks.append(check_normalization(model, options.normalization_constant, options.decay))
    if options.spectral:
        spectrum_grid = options.spectrum_grid or grid
        checks.append(check_eta_orthogonality(model, spectrum_grid))

    notes = []
    if model.perturbation:
        notes.append(f"model perturbed: {model.perturbation}")
    for check in checks:
        if not check.passed:
            level = "report-only check below target" if check.report_only else "check failed"
            notes.append(f"{check.name}: {level} (residual {check.residual:.3e})")
            logger.warning("check_not_passed", check=check.name, residual=check.residual, report_only=check.report_only)

    report = VerificationReport(
        fingerprint=spec_fingerprint(spec),
        grid=grid,
        checks=checks,
        notes=notes,
        timestamp=datetime.now(timezone.utc).isoformat(),
    )
    logger.info("verification_finished", fingerprint=report.fingerprint, passed=report.passed, checks=len(checks))
    return report
