"""Dense GF(2) linear algebra on ``uint8`` numpy arrays."""

from __future__ import annotations

import numpy as np


def row_reduce(mat: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Return the reduced row echelon form of ``mat`` over GF(2) and its pivot columns."""
    m = (np.asarray(mat, dtype=np.uint8) & 1).copy()
    rows, cols = m.shape
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        hits = np.nonzero(m[r:, c])[0]
        if hits.size == 0:
            continue
        p = r + hits[0]
        if p != r:
            m[[r, p]] = m[[p, r]]
        others = np.nonzero(m[:, c])[0]
        others = others[others != r]
        m[others] ^= m[r]
        pivots.append(c)
        r += 1
    return m, pivots


def rank(mat: np.ndarray) -> int:
    """Rank over GF(2)."""
    if np.asarray(mat).size == 0:
        return 0
    return len(row_reduce(mat)[1])


def nullspace(mat: np.ndarray) -> np.ndarray:
    """Basis of the right kernel of ``mat`` over GF(2), one vector per row."""
    m = np.atleast_2d(np.asarray(mat, dtype=np.uint8))
    n = m.shape[1]
    red, pivots = row_reduce(m)
    free = [c for c in range(n) if c not in set(pivots)]
    basis = np.zeros((len(free), n), dtype=np.uint8)
    for i, fc in enumerate(free):
        basis[i, fc] = 1
        for r, pc in enumerate(pivots):
            basis[i, pc] = red[r, fc]
    return basis


def in_rowspace(vec: np.ndarray, mat: np.ndarray) -> bool:
    """True when ``vec`` is a GF(2) combination of the rows of ``mat``."""
    return rank(np.vstack([mat, vec])) == rank(mat)


def solve(mat: np.ndarray, rhs: np.ndarray) -> np.ndarray | None:
    """One solution ``x`` of ``mat @ x = rhs`` over GF(2), or ``None`` if inconsistent."""
    m = np.asarray(mat, dtype=np.uint8)
    aug = np.hstack([m, np.asarray(rhs, dtype=np.uint8).reshape(-1, 1)])
    red, pivots = row_reduce(aug)
    n = m.shape[1]
    if n in pivots:
        return None
    x = np.zeros(n, dtype=np.uint8)
    for r, pc in enumerate(pivots):
        x[pc] = red[r, n]
    return x
