import io

import numpy as np
import pytest
from scipy.sparse import identity

from pdmeta.services.discrete import SizeGuardError, make_grid
from pdmeta.services.eigensolve import spectrum_classify
from pdmeta.services.export import (
    FIELD_COLUMNS,
    field_columns,
    spectrum_summary,
    write_fields_csv,
    write_matrix_csv,
    write_spectrum_csv,
)


def test_field_columns(example_1a):
    grid = make_grid(0.5, 3.0, 26)
    columns = field_columns(example_1a, grid)
    assert tuple(columns) == FIELD_COLUMNS
    np.testing.assert_allclose(columns["psi_abs"], np.hypot(columns["psi_re"], columns["psi_im"]), rtol=1e-14)
    np.testing.assert_allclose(columns["mu"], 1.0 / grid.nodes, rtol=1e-14)


def test_fields_csv_is_full_precision(example_1a):
    grid = make_grid(0.5, 3.0, 26)
    stream = io.StringIO()
    write_fields_csv(stream, example_1a, grid)
    table = np.loadtxt(io.StringIO(stream.getvalue()), delimiter=",", skiprows=2)
    np.testing.assert_array_equal(table[:, FIELD_COLUMNS.index("W")], example_1a.W.eval(grid.nodes))


def test_matrix_csv_pairs_columns():
    grid = make_grid(0.1, 1.0, 16)
    A = np.eye(16) + 2j * np.eye(16, k=1)
    stream = io.StringIO()
    write_matrix_csv(stream, A, grid, "A")
    table = np.loadtxt(io.StringIO(stream.getvalue()), delimiter=",", skiprows=2)
    np.testing.assert_array_equal(table[:, 0], grid.nodes)
    assert table[0, 1] == 1.0 and table[0, 4] == 2.0


def test_matrix_csv_respects_size_guard(monkeypatch):
    monkeypatch.setenv("PDM_MAX_DENSE_N", "16")
    grid = make_grid(0.1, 1.0, 32)
    with pytest.raises(SizeGuardError):
        write_matrix_csv(io.StringIO(), identity(32, format="csr"), grid, "I")


def test_spectrum_output_sorted_with_classes():
    eigs = np.array([3.0, 1.0 - 1.0j, 1.0 + 1.0j, 2.0 + 0.5j])
    classification = spectrum_classify(eigs)
    stream = io.StringIO()
    write_spectrum_csv(stream, classification)
    lines = stream.getvalue().splitlines()
    assert lines[0] == "re,im,class"
    assert [line.rsplit(",", 1)[1] for line in lines[1:]] == ["pair", "pair", "unpaired", "real"]


def test_spectrum_summary_trace_error():
    A = np.diag([1.0, 2.0, 3.0]).astype(complex)
    summary = spectrum_summary(spectrum_classify(np.array([1.0, 2.0, 3.0])), A, with_eigenvalues=True)
    assert summary.trace_error == 0.0
    assert summary.counts == {"real": 3, "pairs": 0, "unpaired": 0}
    assert [row[0] for row in summary.eigenvalues] == [1.0, 2.0, 3.0]
