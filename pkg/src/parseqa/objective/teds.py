"""TEDS and S-TEDS table similarity over the tolerant table parser.

Tables become rooted ordered trees (table -> tr -> td/th); rename cost is
1 on any structural attribute mismatch, otherwise the normalized edit
distance between cell texts (0 in structure-only mode).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..perturb_table import TableError, TableGrid, parse_table
from .kernels import edit_distance_norm, tree_edit_distance


@dataclass
class TreeNode:
    tag: str
    colspan: int = 1
    rowspan: int = 1
    text: str = ""
    children: list["TreeNode"] = field(default_factory=list)


def table_tree(grid: TableGrid) -> TreeNode:
    root = TreeNode("table")
    for row in grid.rows:
        tr = TreeNode("tr")
        for cell in row:
            tr.children.append(
                TreeNode(
                    "th" if cell.header else "td",
                    colspan=cell.colspan,
                    rowspan=cell.rowspan,
                    text=cell.text,
                )
            )
        root.children.append(tr)
    return root


def postorder(root: TreeNode) -> list[TreeNode]:
    out: list[TreeNode] = []

    def walk(node):
        for child in node.children:
            walk(child)
        out.append(node)

    walk(root)
    return out


def _leftmost_leaves(nodes: list[TreeNode]) -> np.ndarray:
    index = {id(n): i for i, n in enumerate(nodes)}
    lml = np.zeros(len(nodes), dtype=np.int64)
    for i, node in enumerate(nodes):
        cur = node
        while cur.children:
            cur = cur.children[0]
        lml[i] = index[id(cur)]
    return lml


def _keyroots(lml: np.ndarray) -> np.ndarray:
    n = len(lml)
    seen = set()
    out = []
    for i in range(n - 1, -1, -1):
        if int(lml[i]) not in seen:
            out.append(i)
            seen.add(int(lml[i]))
    return np.array(sorted(out), dtype=np.int64)


def rename_cost(a: TreeNode, b: TreeNode, structure_only: bool) -> float:
    if a.tag != b.tag or a.colspan != b.colspan or a.rowspan != b.rowspan:
        return 1.0
    if structure_only or a.tag not in ("td", "th"):
        return 0.0
    return edit_distance_norm(a.text, b.text)


def tree_distance(a: TreeNode, b: TreeNode, structure_only: bool = False) -> float:
    na = postorder(a)
    nb = postorder(b)
    lml1 = _leftmost_leaves(na)
    lml2 = _leftmost_leaves(nb)
    rename = np.zeros((len(na), len(nb)))
    for i, x in enumerate(na):
        for j, y in enumerate(nb):
            rename[i, j] = rename_cost(x, y, structure_only)
    return tree_edit_distance(lml1, _keyroots(lml1), lml2, _keyroots(lml2), rename)


def teds(pred_html: str, gt_html: str, structure_only: bool = False) -> float:
    """1 - TED / max(|pred tree|, |gt tree|); unparseable prediction -> 0."""
    gt_tree = table_tree(parse_table(gt_html))  # gold must be valid
    try:
        pred_tree = table_tree(parse_table(pred_html))
    except TableError:
        return 0.0
    n = max(len(postorder(pred_tree)), len(postorder(gt_tree)))
    if n == 0:
        return 1.0
    return 1.0 - tree_distance(pred_tree, gt_tree, structure_only) / n
