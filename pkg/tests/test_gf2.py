from __future__ import annotations

import itertools

import numpy as np

from artifact import gf2


def _span(rows):
    out = set()
    for coeffs in itertools.product((0, 1), repeat=len(rows)):
        v = np.zeros(rows.shape[1], dtype=np.uint8)
        for c, r in zip(coeffs, rows):
            if c:
                v ^= r
        out.add(v.tobytes())
    return out


def test_rank_matches_span_size():
    rng = np.random.default_rng(1)
    for _ in range(40):
        m = rng.integers(0, 2, size=(rng.integers(1, 6), rng.integers(1, 7))).astype(np.uint8)
        assert 2 ** gf2.rank(m) == len(_span(m))


def test_nullspace_is_complete_kernel():
    rng = np.random.default_rng(2)
    for _ in range(30):
        m = rng.integers(0, 2, size=(4, 6)).astype(np.uint8)
        ns = gf2.nullspace(m)
        assert ns.shape[0] == 6 - gf2.rank(m)
        assert not ((m.astype(int) @ ns.T.astype(int)) % 2).any()
        if ns.shape[0]:
            assert gf2.rank(ns) == ns.shape[0]


def test_solve_and_rowspace():
    rng = np.random.default_rng(3)
    for _ in range(30):
        m = rng.integers(0, 2, size=(5, 7)).astype(np.uint8)
        x = rng.integers(0, 2, size=7).astype(np.uint8)
        b = (m.astype(int) @ x) % 2
        sol = gf2.solve(m, b)
        assert sol is not None
        assert np.array_equal((m.astype(int) @ sol) % 2, b)
        combo = (rng.integers(0, 2, size=5) @ m.astype(int)) % 2
        assert gf2.in_rowspace(combo.astype(np.uint8), m)


def test_inconsistent_system_has_no_solution():
    m = np.array([[1, 1], [1, 1]], dtype=np.uint8)
    assert gf2.solve(m, np.array([0, 1])) is None
