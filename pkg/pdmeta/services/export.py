"""CSV and JSON writers for sampled fields, operator matrices and spectra."""

from __future__ import annotations

from typing import IO

import numpy as np
from scipy.sparse import issparse

from pdmeta.schemas import FieldTable, GridSummary, OperatorMatrixPayload, SpectrumSummary, spec_fingerprint
from pdmeta.services import discrete
from pdmeta.services.discrete import RadialGrid
from pdmeta.services.eigensolve import SpectrumClassification
from pdmeta.services.generator import ConstructedModel


FLOAT_FORMAT = "%.17g"

FIELD_COLUMNS = (
    "r",
    "m",
    "mu",
    "g",
    "F",
    "G",
    "V_tilde",
    "W",
    "psi_re",
    "psi_im",
    "psi_abs",
    "phase",
)


def field_columns(model: ConstructedModel, grid: RadialGrid) -> dict[str, np.ndarray]:
    psi = discrete.sample_psi(model, grid)
    return {
        "r": grid.nodes,
        "m": discrete.sample(model.mass, grid),
        "mu": discrete.sample(model.mu, grid),
        "g": discrete.sample(model.g, grid),
        "F": discrete.sample(model.F, grid),
        "G": discrete.sample(model.G, grid),
        "V_tilde": discrete.sample(model.V_tilde, grid),
        "W": discrete.sample_W(model, grid),
        "psi_re": psi.real,
        "psi_im": psi.imag,
        "psi_abs": np.abs(psi),
        "phase": discrete.sample(model.psi_phase, grid),
    }


def field_table(model: ConstructedModel, grid: RadialGrid) -> FieldTable:
    columns = field_columns(model, grid)
    return FieldTable(
        model=spec_fingerprint(model.spec),
        beta=model.beta,
        grid=GridSummary(**grid.summary()),
        columns={name: values.tolist() for name, values in columns.items()},
    )


def write_fields_csv(stream: IO[str], model: ConstructedModel, grid: RadialGrid) -> None:
    columns = field_columns(model, grid)
    header = f"# model={spec_fingerprint(model.spec)} beta={model.beta!r}\n" + ",".join(FIELD_COLUMNS)
    data = np.column_stack([columns[name] for name in FIELD_COLUMNS])
    np.savetxt(stream, data, fmt=FLOAT_FORMAT, delimiter=",", header=header, comments="")


def write_fields_json(stream: IO[str], model: ConstructedModel, grid: RadialGrid) -> None:
    stream.write(field_table(model, grid).model_dump_json(indent=2))
    stream.write("\n")


def write_matrix_csv(stream: IO[str], matrix, grid: RadialGrid, name: str) -> None:
    """One row per node: r, then real and imaginary parts column by column."""

    if issparse(matrix):
        discrete.check_size(grid.n)
        matrix = matrix.toarray()
    dense = np.asarray(matrix, dtype=complex)
    pairs = np.empty((dense.shape[0], 2 * dense.shape[1]))
    pairs[:, 0::2] = dense.real
    pairs[:, 1::2] = dense.imag
    labels = [f"{part}_{j}" for j in range(dense.shape[1]) for part in ("re", "im")]
    header = f"# operator={name} n={grid.n} h={grid.h!r}\n" + ",".join(["r", *labels])
    np.savetxt(
        stream,
        np.column_stack([grid.nodes, pairs]),
        fmt=FLOAT_FORMAT,
        delimiter=",",
        header=header,
        comments="",
    )


def write_matrix_json(stream: IO[str], matrix, grid: RadialGrid, name: str) -> None:
    if issparse(matrix):
        discrete.check_size(grid.n)
        matrix = matrix.toarray()
    dense = np.asarray(matrix, dtype=complex)
    payload = OperatorMatrixPayload(
        operator=name,
        grid=GridSummary(**grid.summary()),
        real=dense.real.tolist(),
        imag=dense.imag.tolist(),
    )
    stream.write(payload.model_dump_json())
    stream.write("\n")


def _labels(classification: SpectrumClassification) -> list[str]:
    labels = ["unpaired"] * len(classification.eigenvalues)
    for i in classification.real_set:
        labels[i] = "real"
    for i, j in classification.conjugate_pairs:
        labels[i] = labels[j] = "pair"
    return labels


def _sorted_rows(classification: SpectrumClassification) -> list[tuple[float, float, str]]:
    lam = classification.eigenvalues
    labels = _labels(classification)
    return [(float(lam[i].real), float(lam[i].imag), labels[i]) for i in np.lexsort((lam.imag, lam.real))]


def write_spectrum_csv(stream: IO[str], classification: SpectrumClassification) -> None:
    """Eigenvalues sorted by real part with their class."""

    rows = np.array(
        [[FLOAT_FORMAT % re, FLOAT_FORMAT % im, label] for re, im, label in _sorted_rows(classification)],
        dtype=object,
    ).reshape(-1, 3)
    np.savetxt(stream, rows, fmt="%s", delimiter=",", header="re,im,class", comments="")


def spectrum_summary(
    classification: SpectrumClassification, matrix: np.ndarray, with_eigenvalues: bool = False
) -> SpectrumSummary:
    """Classification counts plus |sum(lambda) - trace| / (n ||A||)."""

    n = len(classification.eigenvalues)
    scale = max(discrete.max_row_sum(matrix), 1e-300) * max(n, 1)
    trace_error = abs(complex(np.sum(classification.eigenvalues)) - complex(np.trace(matrix))) / scale
    return SpectrumSummary(
        n=n,
        counts=classification.counts,
        unpaired_fraction=classification.unpaired_fraction,
        tol=classification.tol,
        trace_error=trace_error,
        eigenvalues=_sorted_rows(classification) if with_eigenvalues else [],
    )
