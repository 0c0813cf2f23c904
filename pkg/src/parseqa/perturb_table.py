"""Tolerant HTML table parsing, canonical serialization, and the two
rule-based structural injectors (row/column deletion, cell content loss).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from html import escape, unescape
from html.parser import HTMLParser

import numpy as np


class TableError(ValueError):
    pass


@dataclass
class Cell:
    text: str = ""
    colspan: int = 1
    rowspan: int = 1
    header: bool = False


@dataclass
class TableGrid:
    rows: list[list[Cell]] = field(default_factory=list)

    def n_rows(self) -> int:
        return len(self.rows)

    def n_cols(self) -> int:
        occ = self.occupancy()
        return occ.shape[1] if occ.size else 0

    def cells(self) -> list[Cell]:
        return [c for row in self.rows for c in row]

    def occupancy(self) -> np.ndarray:
        """Logical grid: entry (r, c) holds the flat index of the claiming
        cell, or -1. Raises on overlapping span claims."""
        n_rows = len(self.rows)
        width = 0
        grid: list[list[int]] = [[] for _ in range(n_rows)]
        taken: dict[tuple[int, int], int] = {}
        flat = 0
        for r, row in enumerate(self.rows):
            c = 0
            for cell in row:
                while (r, c) in taken:
                    c += 1
                for dr in range(cell.rowspan):
                    for dc in range(cell.colspan):
                        key = (r + dr, c + dc)
                        if key in taken:
                            raise TableError(f"overlapping span claim at {key}")
                        taken[key] = flat
                flat += 1
                c += cell.colspan
            width = max(width, c)
        width = max(width, max((c + 1 for (_, c) in taken), default=0))
        height = max(n_rows, max((r + 1 for (r, _) in taken), default=0))
        occ = np.full((height, width), -1, dtype=np.int64)
        for (r, c), idx in taken.items():
            occ[r, c] = idx
        return occ


class _TableHTMLParser(HTMLParser):
    """Tolerant parser: auto-closes unclosed td/tr, accepts thead/tbody/tfoot
    wrappers, rejects nested tables, keeps only colspan/rowspan attrs."""

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.in_table = False
        self.table_done = False
        self.rows: list[list[Cell]] = []
        self.cur_row: list[Cell] | None = None
        self.cur_cell: Cell | None = None
        self.buf: list[str] = []

    def _close_cell(self):
        if self.cur_cell is not None:
            self.cur_cell.text = "".join(self.buf).strip()
            self.cur_row.append(self.cur_cell)
            self.cur_cell = None
            self.buf = []

    def _close_row(self):
        self._close_cell()
        if self.cur_row is not None:
            self.rows.append(self.cur_row)
            self.cur_row = None

    @staticmethod
    def _span(attrs, name):
        for k, v in attrs:
            if k == name:
                try:
                    value = int(str(v).strip())
                except (TypeError, ValueError):
                    raise TableError(f"invalid span: {name}={v!r}")
                if value <= 0:
                    raise TableError(f"invalid span: {name}={value}")
                return value
        return 1

    def handle_starttag(self, tag, attrs):
        if tag == "table":
            if self.in_table:
                raise TableError("nested table unsupported")
            self.in_table = True
            return
        if not self.in_table or self.table_done:
            return
        if tag == "tr":
            self._close_row()
            self.cur_row = []
        elif tag in ("td", "th"):
            self._close_cell()
            if self.cur_row is None:
                self.cur_row = []
            self.cur_cell = Cell(
                colspan=self._span(attrs, "colspan"),
                rowspan=self._span(attrs, "rowspan"),
                header=(tag == "th"),
            )
        elif tag == "br" and self.cur_cell is not None:
            self.buf.append("\n")

    def handle_endtag(self, tag):
        if not self.in_table:
            return
        if tag in ("td", "th"):
            self._close_cell()
        elif tag == "tr":
            self._close_row()
        elif tag == "table":
            self._close_row()
            self.in_table = False
            self.table_done = True

    def handle_data(self, data):
        if self.cur_cell is not None:
            self.buf.append(data)


def parse_table(html: str) -> TableGrid:
    if "<table" not in html.lower():
        raise TableError("not a table")
    parser = _TableHTMLParser()
    parser.feed(html)
    parser.close()
    parser._close_row()
    grid = TableGrid(rows=[row for row in parser.rows if row])
    grid.occupancy()  # validates span claims
    return grid


def serialize_table(grid: TableGrid) -> str:
    """Minimal canonical HTML; spans only when >1, no styling attributes."""
    parts = ["<table>"]
    for row in grid.rows:
        parts.append("<tr>")
        for cell in row:
            tag = "th" if cell.header else "td"
            attrs = ""
            if cell.colspan > 1:
                attrs += f' colspan="{cell.colspan}"'
            if cell.rowspan > 1:
                attrs += f' rowspan="{cell.rowspan}"'
            parts.append(f"<{tag}{attrs}>{escape(cell.text)}</{tag}>")
        parts.append("</tr>")
    parts.append("</table>")
    return "".join(parts)


def grids_equal(a: TableGrid, b: TableGrid) -> bool:
    if len(a.rows) != len(b.rows):
        return False
    for ra, rb in zip(a.rows, b.rows):
        if len(ra) != len(rb):
            return False
        for ca, cb in zip(ra, rb):
            if (ca.text, ca.colspan, ca.rowspan, ca.header) != (
                cb.text,
                cb.colspan,
                cb.rowspan,
                cb.header,
            ):
                return False
    return True


def delete_rows_columns(
    grid: TableGrid, rng: np.random.Generator
) -> tuple[TableGrid, dict]:
    """Remove 1..n-1 rows and/or 1..c-1 columns; spans crossing a deleted
    line shrink so the occupancy matrix stays consistent."""
    occ = grid.occupancy()
    n_rows, n_cols = occ.shape
    if n_rows < 2 and n_cols < 2:
        raise TableError("too small: nothing can be deleted from a 1x1 grid")

    mode = int(rng.integers(3))  # 0 rows, 1 cols, 2 both
    del_rows: list[int] = []
    del_cols: list[int] = []
    if mode in (0, 2) and n_rows >= 2:
        k = int(rng.integers(1, n_rows))
        del_rows = sorted(rng.choice(n_rows, size=k, replace=False).tolist())
    if (mode in (1, 2) and n_cols >= 2) or (not del_rows and n_cols >= 2):
        k = int(rng.integers(1, n_cols))
        del_cols = sorted(rng.choice(n_cols, size=k, replace=False).tolist())
    if not del_rows and not del_cols:
        k = int(rng.integers(1, n_rows))
        del_rows = sorted(rng.choice(n_rows, size=k, replace=False).tolist())

    # Rebuild from the logical grid: keep each anchor cell once, clipped.
    keep_rows = [r for r in range(n_rows) if r not in del_rows]
    keep_cols = [c for c in range(n_cols) if c not in del_cols]
    flat_cells = grid.cells()
    anchors: dict[int, tuple[int, int]] = {}
    for r in range(n_rows):
        for c in range(n_cols):
            idx = int(occ[r, c])
            if idx >= 0 and idx not in anchors:
                anchors[idx] = (r, c)

    new_rows: list[list[Cell]] = []
    for r in keep_rows:
        new_row: list[Cell] = []
        for c in keep_cols:
            idx = int(occ[r, c])
            if idx < 0:
                continue
            ar, ac = anchors[idx]
            surviving_anchor_r = min(
                (rr for rr in keep_rows if occ[rr, c] == idx), default=None
            )
            surviving_anchor_c = min(
                (cc for cc in keep_cols if occ[r, cc] == idx), default=None
            )
            if r != surviving_anchor_r or c != surviving_anchor_c:
                continue
            cell = flat_cells[idx]
            rowspan = sum(
                1 for rr in keep_rows if rr in range(ar, ar + cell.rowspan)
            )
            colspan = sum(
                1 for cc in keep_cols if cc in range(ac, ac + cell.colspan)
            )
            new_row.append(
                Cell(cell.text, max(1, colspan), max(1, rowspan), cell.header)
            )
        if new_row:
            new_rows.append(new_row)
    out = TableGrid(rows=new_rows)
    out.occupancy()
    receipt = {"deleted_rows": del_rows, "deleted_cols": del_cols}
    return out, receipt


def delete_cells(grid: TableGrid, rng: np.random.Generator) -> tuple[TableGrid, dict]:
    """Empty the text of k cells; structure (spans, dims) unchanged."""
    flat = grid.cells()
    nonempty = [i for i, c in enumerate(flat) if c.text]
    if not nonempty:
        raise TableError("all cells empty: nothing to delete")
    k_max = max(1, len(flat) // 5)
    k = int(rng.integers(1, min(k_max, len(nonempty)) + 1))
    picked = set(rng.choice(nonempty, size=k, replace=False).tolist())
    out_rows = []
    flat_idx = 0
    for row in grid.rows:
        new_row = []
        for cell in row:
            text = "" if flat_idx in picked else cell.text
            new_row.append(Cell(text, cell.colspan, cell.rowspan, cell.header))
            flat_idx += 1
        out_rows.append(new_row)
    return TableGrid(rows=out_rows), {"emptied_cells": sorted(picked)}
