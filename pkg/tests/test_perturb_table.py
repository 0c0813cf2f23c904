import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parseqa.perturb_table import (
    TableError,
    delete_cells,
    delete_rows_columns,
    grids_equal,
    parse_table,
    serialize_table,
)
from parseqa.rng import make_rng

from conftest import TABLE, random_table_html


def test_parse_simple_table_shape():
    grid = parse_table(TABLE)
    assert grid.n_rows() == 4
    assert grid.n_cols() == 3
    occ = grid.occupancy()
    assert occ.shape == (4, 3)
    assert (occ >= 0).all()


def test_parse_tolerates_unclosed_tags_and_attrs():
    sloppy = '<table border="1"><tr><td>a<td>b<tr><td>c<td>d</table>'
    grid = parse_table(sloppy)
    assert grid.n_rows() == 2
    assert grid.n_cols() == 2
    assert [c.text for c in grid.rows[0]] == ["a", "b"]


def test_parse_spans():
    html = (
        '<table><tr><td colspan="2">ab</td><td>c</td></tr>'
        '<tr><td rowspan="2">r</td><td>x</td><td>y</td></tr>'
        "<tr><td>p</td><td>q</td></tr></table>"
    )
    grid = parse_table(html)
    assert grid.n_rows() == 3
    assert grid.n_cols() == 3
    assert grid.rows[0][0].colspan == 2
    assert grid.rows[1][0].rowspan == 2


def test_parse_rejects_non_table_and_nested():
    with pytest.raises(TableError):
        parse_table("just text")
    with pytest.raises(TableError):
        parse_table("<table><tr><td><table></table></td></tr></table>")
    with pytest.raises(TableError):
        parse_table('<table><tr><td colspan="0">x</td></tr></table>')


def test_serialize_parse_roundtrip_is_fixed_point():
    for seed in range(80):
        html = random_table_html(make_rng(seed))
        grid = parse_table(html)
        canon = serialize_table(grid)
        again = serialize_table(parse_table(canon))
        assert canon == again
        assert grids_equal(grid, parse_table(canon))


def test_serialize_escapes_html():
    grid = parse_table("<table><tr><td>a &amp; b &lt;c&gt;</td></tr></table>")
    assert grid.rows[0][0].text == "a & b <c>"
    canon = serialize_table(grid)
    assert "&amp;" in canon and "&lt;c&gt;" in canon
    assert grids_equal(grid, parse_table(canon))


def test_delete_rows_columns_strictly_shrinks():
    grid = parse_table(TABLE)
    for seed in range(60):
        out, params = delete_rows_columns(grid, make_rng(seed))
        assert params["deleted_rows"] or params["deleted_cols"]
        assert (out.n_rows() < grid.n_rows()) or (out.n_cols() < grid.n_cols())
        out.occupancy()  # still a valid grid
        assert not grids_equal(out, grid)


def test_delete_rows_columns_rejects_minimal_table():
    grid = parse_table("<table><tr><td>only</td></tr></table>")
    with pytest.raises(TableError):
        delete_rows_columns(grid, make_rng(0))


def test_delete_cells_empties_but_preserves_shape():
    grid = parse_table(TABLE)
    for seed in range(60):
        out, params = delete_cells(grid, make_rng(seed))
        assert out.n_rows() == grid.n_rows()
        assert out.n_cols() == grid.n_cols()
        emptied = params["emptied_cells"]
        assert 1 <= len(emptied) <= max(1, sum(len(r) for r in grid.rows) // 5)
        flat_before = grid.cells()
        flat_after = out.cells()
        for i in emptied:
            assert flat_after[i].text == ""
            assert flat_before[i].text != ""


def test_delete_cells_requires_nonempty_cell():
    grid = parse_table("<table><tr><td></td><td></td></tr></table>")
    with pytest.raises(TableError):
        delete_cells(grid, make_rng(0))


def test_ops_never_mutate_input():
    grid = parse_table(TABLE)
    before = serialize_table(grid)
    delete_rows_columns(grid, make_rng(1))
    delete_cells(grid, make_rng(1))
    assert serialize_table(grid) == before


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=80, deadline=None)
def test_random_tables_parse_and_roundtrip(seed):
    html = random_table_html(make_rng(seed))
    grid = parse_table(html)
    assert grids_equal(grid, parse_table(serialize_table(grid)))


@given(st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_row_column_deletion_total_on_random_tables(seed, op_seed):
    html = random_table_html(make_rng(seed))
    grid = parse_table(html)
    try:
        out, _ = delete_rows_columns(grid, make_rng(op_seed))
    except TableError:
        assert grid.n_rows() == 1 and grid.n_cols() == 1
        return
    out.occupancy()
