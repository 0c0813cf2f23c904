from .kernels import USE_NUMBA, edit_distance_norm, levenshtein, tree_edit_distance
from .teds import TreeNode, postorder, table_tree, teds, tree_distance
from .align import AlignmentReport, alignment_report, default_metric

__all__ = [
    "USE_NUMBA",
    "edit_distance_norm",
    "levenshtein",
    "tree_edit_distance",
    "TreeNode",
    "postorder",
    "table_tree",
    "teds",
    "tree_distance",
    "AlignmentReport",
    "alignment_report",
    "default_metric",
]
