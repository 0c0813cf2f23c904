"""Hot numeric kernels: Levenshtein DP and ordered tree edit distance.

Both are compiled with numba by default. Set ``PARSEQA_NO_NUMBA=1`` to
select the pure numpy/Python fallback (identical results, used for
benchmark comparison and as a safety hatch).
"""

from __future__ import annotations

import os

import numpy as np

USE_NUMBA = os.environ.get("PARSEQA_NO_NUMBA", "") not in ("1", "true", "yes")


def _levenshtein_impl(a, b):
    n, m = a.shape[0], b.shape[0]
    if n == 0:
        return m
    if m == 0:
        return n
    prev = np.arange(m + 1)
    cur = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        cur[0] = i
        ai = a[i - 1]
        for j in range(1, m + 1):
            cost = 0 if ai == b[j - 1] else 1
            x = prev[j] + 1
            y = cur[j - 1] + 1
            z = prev[j - 1] + cost
            best = x if x < y else y
            if z < best:
                best = z
            cur[j] = best
        prev, cur = cur, prev
    return int(prev[m])


def _tree_dist_impl(lml1, kr1, lml2, kr2, rename):
    n1 = lml1.shape[0]
    n2 = lml2.shape[0]
    treedist = np.zeros((n1, n2))
    fd = np.zeros((n1 + 1, n2 + 1))
    for ki in range(kr1.shape[0]):
        i = kr1[ki]
        li = lml1[i]
        for kj in range(kr2.shape[0]):
            j = kr2[kj]
            lj = lml2[j]
            m = i - li + 2
            n = j - lj + 2
            fd[0, 0] = 0.0
            for di in range(1, m):
                fd[di, 0] = fd[di - 1, 0] + 1.0
            for dj in range(1, n):
                fd[0, dj] = fd[0, dj - 1] + 1.0
            for di in range(1, m):
                i1 = li + di - 1
                for dj in range(1, n):
                    j1 = lj + dj - 1
                    if lml1[i1] == li and lml2[j1] == lj:
                        a = fd[di - 1, dj] + 1.0
                        b = fd[di, dj - 1] + 1.0
                        c = fd[di - 1, dj - 1] + rename[i1, j1]
                        best = a if a < b else b
                        if c < best:
                            best = c
                        fd[di, dj] = best
                        treedist[i1, j1] = best
                    else:
                        a = fd[di - 1, dj] + 1.0
                        b = fd[di, dj - 1] + 1.0
                        c = fd[lml1[i1] - li, lml2[j1] - lj] + treedist[i1, j1]
                        best = a if a < b else b
                        if c < best:
                            best = c
                        fd[di, dj] = best
    return treedist[n1 - 1, n2 - 1]


if USE_NUMBA:
    from numba import njit

    _levenshtein_kernel = njit(cache=True)(_levenshtein_impl)
    _tree_dist_kernel = njit(cache=True)(_tree_dist_impl)
else:
    _levenshtein_kernel = _levenshtein_impl
    _tree_dist_kernel = _tree_dist_impl


def _codes(s: str) -> np.ndarray:
    return np.array([ord(c) for c in s], dtype=np.int64)


def levenshtein(a: str, b: str) -> int:
    """Exact edit distance over Unicode scalar values."""
    return int(_levenshtein_kernel(_codes(a), _codes(b)))


def edit_distance_norm(a: str, b: str) -> float:
    """Levenshtein(a, b) / max(|a|, |b|); 0 when both empty."""
    if not a and not b:
        return 0.0
    return levenshtein(a, b) / max(len(a), len(b))


def tree_edit_distance(
    lml1: np.ndarray,
    kr1: np.ndarray,
    lml2: np.ndarray,
    kr2: np.ndarray,
    rename: np.ndarray,
) -> float:
    """Ordered tree edit distance (postorder arrays, keyroot recursion)
    with unit insert/delete and a precomputed rename cost matrix."""
    return float(_tree_dist_kernel(lml1, kr1, lml2, kr2, rename))
