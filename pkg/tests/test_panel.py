import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from panelbreak.errors import DimensionError, PanelParseError, ParameterError
from panelbreak.panel import (BreakSpec, PanelMatrix, column_means, grid_index,
                              load_panel, write_panel)


def write(tmp_path, text, name="panel.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_rows_and_columns(tmp_path):
    path = write(tmp_path, "1,2,3,4\n5,6,7,8\n")
    panel = load_panel(path)
    assert panel.shape == (2, 4)
    assert panel.values[1].tolist() == [5.0, 6.0, 7.0, 8.0]
    with pytest.raises(DimensionError):
        load_panel(path, layout="columns")


def test_columns_layout_transposes(tmp_path):
    path = write(tmp_path, "1,5\n2,6\n3,7\n4,8\n")
    panel = load_panel(path, layout="columns")
    assert panel.values.tolist() == [[1, 2, 3, 4], [5, 6, 7, 8]]


def test_header_row_is_skipped(tmp_path):
    panel = load_panel(write(tmp_path, "t1,t2,t3,t4\n1,2,3,4\n"))
    assert panel.shape == (1, 4)


def test_first_row_with_empty_cell_is_not_a_header(tmp_path):
    with pytest.raises(PanelParseError) as info:
        load_panel(write(tmp_path, "1,,3,4\n5,6,7,8\n"))
    assert info.value.line == 1
    assert "column 2" in str(info.value)


def test_partly_numeric_first_row_is_not_a_header(tmp_path):
    with pytest.raises(PanelParseError) as info:
        load_panel(write(tmp_path, "id,2,3,4\n5,6,7,8\n"))
    assert info.value.line == 1
    assert "column 1" in str(info.value)


def test_blank_lines_are_ignored(tmp_path):
    panel = load_panel(write(tmp_path, "1,2,3\n\n4,5,6\n"))
    assert panel.shape == (2, 3)


def test_ragged_row_reports_line(tmp_path):
    with pytest.raises(PanelParseError) as info:
        load_panel(write(tmp_path, "1,2,3\n4,5\n"))
    assert info.value.line == 2
    assert "expected 3 fields" in str(info.value)


@pytest.mark.parametrize("cell", ["nan", "inf", "-inf"])
def test_non_finite_cell(tmp_path, cell):
    with pytest.raises(PanelParseError, match="non-finite"):
        load_panel(write(tmp_path, "1,2,3\n4,%s,6\n" % cell))


def test_non_numeric_cell(tmp_path):
    with pytest.raises(PanelParseError, match="non-numeric"):
        load_panel(write(tmp_path, "1,2,3\n4,x,6\n"))


def test_empty_file(tmp_path):
    with pytest.raises(PanelParseError):
        load_panel(write(tmp_path, ""))


def test_bad_layout(tmp_path):
    with pytest.raises(ParameterError):
        load_panel(write(tmp_path, "1,2,3\n"), layout="diagonal")


@given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(3, 8)),
              elements=st.floats(-1e12, 1e12, allow_nan=False)))
def test_write_then_load_is_exact(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("io") / "p.csv"
    panel = PanelMatrix(values)
    for layout in ("rows", "columns"):
        write_panel(panel, path, layout)
        again = load_panel(path, layout)
        assert np.array_equal(again.values, panel.values)


def test_panel_is_read_only():
    panel = PanelMatrix(np.zeros((2, 4)))
    with pytest.raises(ValueError):
        panel.values[0, 0] = 1.0


def test_panel_validation():
    with pytest.raises(DimensionError):
        PanelMatrix(np.zeros((2, 2)))
    with pytest.raises(DimensionError):
        PanelMatrix(np.zeros((2, 3, 4)))
    with pytest.raises(ParameterError):
        PanelMatrix([[1.0, np.nan, 2.0]])


def test_column_means_examples():
    panel = PanelMatrix([[1, 2, 3, 4], [7, 7, 7, 7], [-1, 1, -1, 1]])
    assert column_means(panel).tolist() == [2.5, 7.0, 0.0]


@given(st.permutations(range(6)))
def test_column_means_permutation_invariant(order):
    rng = np.random.default_rng(0)
    values = rng.normal(size=(3, 6))
    shuffled = PanelMatrix(values[:, list(order)])
    np.testing.assert_allclose(column_means(shuffled),
                               column_means(PanelMatrix(values)), rtol=1e-14)


def test_grid_index():
    assert grid_index(0.29, 100) == 29
    assert grid_index(0.1, 200) == 20
    assert grid_index(0.5, 5) == 2
    assert grid_index(0.999, 10) == 9


def test_break_spec():
    spec = BreakSpec.from_theta(0.5, 200, np.ones(3))
    assert spec.change_time == 100
    assert not spec.is_null
    assert BreakSpec.from_theta(0.3, 10, np.zeros(2)).is_null
    with pytest.raises(ParameterError):
        BreakSpec.from_theta(1.0, 10, [1.0])
    with pytest.raises(DimensionError):
        spec.validate(PanelMatrix(np.zeros((2, 200))))
    with pytest.raises(ParameterError):
        BreakSpec.from_theta(0.01, 10, [1.0]).validate(PanelMatrix(np.zeros((1, 10))))


def test_arithmetic():
    panel = PanelMatrix([[1.0, 2.0, 3.0]])
    assert (2 * panel).values.tolist() == [[2.0, 4.0, 6.0]]
    assert (panel + panel).values.tolist() == [[2.0, 4.0, 6.0]]
    assert math.isclose((panel + 1.0).values.sum(), 9.0)
