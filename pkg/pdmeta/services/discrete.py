"""Radial grids, finite-difference operators and dense complex arithmetic."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np
from scipy.sparse import diags, issparse

from pdmeta.config import get_settings
from pdmeta.logging import get_logger
from pdmeta.services.funcspace import Domain, DomainError, RadialFunction
from pdmeta.services.generator import ConstructedModel
from pdmeta.services.validators import ValidationException, validate_grid_bounds


logger = get_logger(__name__)

W_CANCELLATION = 1e-10

OperatorMatrix = np.ndarray
ComplexVector = np.ndarray


class SizeGuardError(DomainError):
    """Dense operator requested above the configured size limit."""

    def __init__(self, n: int, limit: int) -> None:
        super().__init__(f"Dense size n = {n} exceeds the limit of {limit}.")
        self.n = n
        self.limit = limit


class DimensionMismatchError(ValueError):
    def __init__(self, message: str, shapes: tuple) -> None:
        super().__init__(message)
        self.message = message
        self.shapes = shapes


@dataclass(frozen=True)
class RadialGrid:
    r_min: float
    r_max: float
    n: int
    mode: Domain = Domain.HALF_LINE

    @property
    def h(self) -> float:
        return (self.r_max - self.r_min) / (self.n - 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        nodes = np.linspace(self.r_min, self.r_max, self.n)
        nodes.setflags(write=False)
        return nodes

    def summary(self) -> dict[str, float | int | str]:
        return {
            "r_min": self.r_min,
            "r_max": self.r_max,
            "n": self.n,
            "h": self.h,
            "mode": self.mode.value,
        }


class AdjointPair(NamedTuple):
    formula: OperatorMatrix
    adjoint: OperatorMatrix


def make_grid(r_min: float, r_max: float, n: int, mode: Domain | str = Domain.HALF_LINE) -> RadialGrid:
    mode = Domain(mode)
    validate_grid_bounds(float(r_min), float(r_max), int(n), mode.value)
    if mode is Domain.FULL_LINE:
        half_width = 0.5 * (r_max - r_min)
        r_min, r_max = -half_width, half_width
    return RadialGrid(float(r_min), float(r_max), int(n), mode)


def refine_grid(grid: RadialGrid) -> RadialGrid:
    """Halve the spacing on the same interval (nested on the half line, even count on the full line)."""

    n = 2 * grid.n - 1 if grid.mode is Domain.HALF_LINE else 2 * grid.n
    return RadialGrid(grid.r_min, grid.r_max, n, grid.mode)


def interior_mask(
    grid: RadialGrid,
    margin: int | None = None,
    window: tuple[float, float] | None = None,
) -> np.ndarray:
    """Nodes away from the boundary closure, optionally restricted to a window."""

    margin = get_settings().interior_margin if margin is None else margin
    mask = np.zeros(grid.n, dtype=bool)
    mask[margin : grid.n - margin] = True
    if window is not None:
        lo, hi = window
        nodes = grid.nodes
        mask &= (nodes >= lo - 1e-12) & (nodes <= hi + 1e-12)
    return mask


def check_size(n: int) -> None:
    limit = get_settings().max_dense_n
    if n > limit:
        raise SizeGuardError(n, limit)


def _check_domain(model: ConstructedModel, grid: RadialGrid) -> None:
    if model.domain is Domain.HALF_LINE and grid.mode is Domain.FULL_LINE:
        raise DomainError("A half-line model cannot be discretized on a full-line grid.")


# ---------------------------------------------------------------------------
# Stencils
# ---------------------------------------------------------------------------


def _d1(grid: RadialGrid):
    return diags([-1.0, 1.0], [-1, 1], shape=(grid.n, grid.n)) / (2.0 * grid.h)


def _d2(grid: RadialGrid):
    return diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(grid.n, grid.n)) / grid.h**2


def first_diff(grid: RadialGrid) -> OperatorMatrix:
    """Central first difference with zero values beyond the endpoints."""

    check_size(grid.n)
    return _d1(grid).toarray()


def second_diff(grid: RadialGrid) -> OperatorMatrix:
    check_size(grid.n)
    return _d2(grid).toarray()


def sample(fun: RadialFunction, grid: RadialGrid, order: int = 0) -> np.ndarray:
    if order == 0:
        return np.asarray(fun.eval(grid.nodes))
    return np.asarray(fun.deriv(order, grid.nodes))


def sample_W(model: ConstructedModel, grid: RadialGrid) -> np.ndarray:
    """W on the nodes.

    W = -2 mu (g' mu + g mu'); where the two products cancel to within
    W_CANCELLATION of their size the sample is set to exactly zero, so a
    model whose W vanishes identically gives a real H.
    """
    W = sample(model.W, grid)
    mu = sample(model.mu, grid)
    g_mu_prime = np.abs(sample(model.g, grid, 1) * mu) + np.abs(sample(model.g, grid) * sample(model.mu, grid, 1))
    scale = 2.0 * np.abs(mu) * g_mu_prime
    return np.where(np.abs(W) <= W_CANCELLATION * scale, 0.0, W)


def sample_psi(model: ConstructedModel, grid: RadialGrid) -> ComplexVector:
    _check_domain(model, grid)
    return model.psi(grid.nodes)


def _assemble(second, first, zeroth, grid: RadialGrid, sparse: bool):
    op = diags(np.asarray(zeroth, dtype=complex))
    if first is not None:
        op = op + diags(np.asarray(first, dtype=complex)) @ _d1(grid)
    if second is not None:
        op = op + diags(np.asarray(second, dtype=complex)) @ _d2(grid)
    if sparse:
        return op.tocsr()
    check_size(grid.n)
    return np.asarray(op.toarray(), dtype=complex)


# ---------------------------------------------------------------------------
# Operators
#
# Every builder returns a dense OperatorMatrix; sparse=True returns the same
# operator in CSR form for matrix-free residual checks on large grids.
# ---------------------------------------------------------------------------


def discretize_H(model: ConstructedModel, grid: RadialGrid, sparse: bool = False) -> OperatorMatrix:
    """H = -1/(2m) D2 + m'/(2m^2) D1 + V_tilde + iW."""

    _check_domain(model, grid)
    m = sample(model.mass, grid)
    dm = sample(model.mass, grid, 1)
    potential = sample(model.V_tilde, grid) + 1j * sample_W(model, grid)
    H = _assemble(-0.5 / m, dm / (2.0 * m * m), potential, grid, sparse)
    logger.debug("operator_discretized", operator="H", n=grid.n, sparse=sparse)
    return H


def discretize_O(model: ConstructedModel, grid: RadialGrid, sparse: bool = False) -> OperatorMatrix:
    """O = mu D1 + F + iG."""

    _check_domain(model, grid)
    mu = sample(model.mu, grid)
    Z = sample(model.F, grid) + 1j * sample(model.G, grid)
    return _assemble(None, mu, Z, grid, sparse)


def discretize_O_dagger(model: ConstructedModel, grid: RadialGrid, sparse: bool = False) -> AdjointPair:
    """O-dagger from the differential formula -mu D1 - mu' + F - iG, and as the adjoint of O."""

    _check_domain(model, grid)
    mu = sample(model.mu, grid)
    dmu = sample(model.mu, grid, 1)
    Zc = sample(model.F, grid) - 1j * sample(model.G, grid)
    formula = _assemble(None, -mu, -dmu + Zc, grid, sparse)
    return AdjointPair(formula=formula, adjoint=adjoint(discretize_O(model, grid, sparse)))


def discretize_eta(
    model: ConstructedModel,
    grid: RadialGrid,
    method: str = "factored",
    sparse: bool = False,
) -> OperatorMatrix:
    """Metric operator, either adjoint(O) @ O or the expanded second-order expression.

    The factored product is returned as its Hermitian part so that
    eta == adjoint(eta) holds bit for bit.
    """
    _check_domain(model, grid)
    if method == "factored":
        O = discretize_O(model, grid, sparse)
        product = adjoint(O) @ O
        return 0.5 * (product + adjoint(product))
    if method != "direct":
        raise ValidationException(f"Unknown eta method {method!r}; expected factored or direct.")

    mu = sample(model.mu, grid)
    dmu = sample(model.mu, grid, 1)
    F = sample(model.F, grid)
    G = sample(model.G, grid)
    d_muF = (model.mu * model.F).deriv(1, grid.nodes)
    d_muG = (model.mu * model.G).deriv(1, grid.nodes)
    return _assemble(
        -mu * mu,
        -2.0 * mu * dmu - 2j * mu * G,
        F * F + G * G - d_muF - 1j * d_muG,
        grid,
        sparse,
    )


# ---------------------------------------------------------------------------
# Dense arithmetic
# ---------------------------------------------------------------------------


def apply(matrix: OperatorMatrix, vector: ComplexVector) -> ComplexVector:
    if matrix.ndim != 2 or matrix.shape[1] != np.shape(vector)[0]:
        raise DimensionMismatchError("Matrix and vector dimensions disagree.", (matrix.shape, np.shape(vector)))
    return matrix @ vector


def adjoint(matrix: OperatorMatrix) -> OperatorMatrix:
    return matrix.conj().T


def matmul(a: OperatorMatrix, b: OperatorMatrix) -> OperatorMatrix:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionMismatchError("Matrix dimensions disagree.", (a.shape, b.shape))
    return a @ b


def vector_norm(vector: ComplexVector, mask: np.ndarray | None = None) -> float:
    v = np.asarray(vector)
    if mask is not None:
        v = v[mask]
    return float(np.linalg.norm(v))


def max_row_sum(matrix: OperatorMatrix) -> float:
    """Infinity norm: largest absolute row sum."""

    if issparse(matrix):
        return float(abs(matrix).sum(axis=1).max()) if matrix.shape[0] else 0.0
    return float(np.max(np.sum(np.abs(matrix), axis=1))) if matrix.size else 0.0
