from __future__ import annotations

import dataclasses
import itertools
import json

import numpy as np
import pytest

from artifact import gf2
from artifact.geometry import (Face, build_color_code, code_to_json, min_logical_weight, steane_equivalent,
                               validate_code)

from conftest import code

# data qubits and faces read off the lattice figures' totals
COUNTS = {
    ("C488", 3): (7, 3), ("C488", 5): (17, 8), ("C488", 7): (31, 15), ("C488", 9): (49, 24),
    ("C666", 3): (7, 3), ("C666", 5): (19, 9), ("C666", 7): (37, 18), ("C666", 9): (61, 30),
}


def brute_force_distance(c, pauli: str) -> int:
    """Smallest nontrivial logical by enumerating supports in order of weight."""
    h = c.check_matrix().astype(np.int64)
    for w in range(1, c.n + 1):
        for support in itertools.combinations(range(c.n), w):
            v = np.zeros(c.n, dtype=np.uint8)
            v[list(support)] = 1
            if ((h @ v) % 2).any():
                continue
            if not gf2.in_rowspace(v, h.astype(np.uint8)):
                return w
    raise AssertionError("no logical found")


@pytest.mark.parametrize("family,d", sorted(COUNTS))
def test_counts_and_structure(family, d):
    c = code(family, d)
    assert (c.n, c.num_faces) == COUNTS[(family, d)]
    assert validate_code(c) == []


@pytest.mark.parametrize("family,d", sorted(COUNTS))
def test_independent_coloring_and_commutation(family, d):
    c = code(family, d)
    h = c.check_matrix().astype(int)
    overlap = h @ h.T
    assert not (overlap % 2).any()
    for i, j in itertools.combinations(range(c.num_faces), 2):
        if overlap[i, j]:
            assert c.faces[i].color != c.faces[j].color
    for q in range(c.n):
        colors = [c.faces[f].color for f in c.faces_of_qubit(q)]
        assert 1 <= len(colors) <= 3 and len(set(colors)) == len(colors)
    allowed = {4, 8} if family == "C488" else {4, 6}
    assert {f.weight for f in c.faces} <= allowed


def test_small_codes_are_steane():
    assert steane_equivalent(code("C488", 3))
    assert steane_equivalent(code("C666", 3))
    assert all(f.weight == 4 for f in code("C488", 3).faces)


@pytest.mark.parametrize("family,d", [("C488", 3), ("C666", 3), ("C488", 5), ("C666", 5)])
def test_distance_by_brute_force(family, d):
    c = code(family, d)
    assert brute_force_distance(c, "X") == d
    assert min_logical_weight(c, "X") == d
    assert min_logical_weight(c, "Z") == d


def test_logicals_are_minimal_and_anticommute():
    for (family, d) in COUNTS:
        c = code(family, d)
        lx, lz = c.logical_vector("X"), c.logical_vector("Z")
        assert lx.sum() == d and lz.sum() == d
        assert int(lx.astype(int) @ lz.astype(int)) % 2 == 1


@pytest.mark.parametrize("bad", [2, 4, 1, 0, -3])
def test_rejects_bad_distance(bad):
    with pytest.raises(ValueError):
        build_color_code("C488", bad)


def test_rejects_unknown_family():
    with pytest.raises(ValueError):
        build_color_code("C999", 3)


def test_deterministic_indexing():
    a, b = build_color_code("C666", 5), build_color_code("C666", 5)
    assert code_to_json(a) == code_to_json(b)


def test_mutated_face_reports_commutation():
    c = build_color_code("C488", 5)
    f = c.faces[0]
    extra = next(q for q in range(c.n) if q not in f.support)
    faces = list(c.faces)
    faces[0] = dataclasses.replace(f, support=tuple(f.support[:-1]) + (extra,))
    bad = dataclasses.replace(c, faces=tuple(faces) if isinstance(c.faces, tuple) else faces)
    assert any(m.startswith("commutation") for m in validate_code(bad))


def test_same_color_neighbours_reported():
    c = build_color_code("C488", 5)
    h = c.check_matrix().astype(int)
    i, j = next((i, j) for i, j in itertools.combinations(range(c.num_faces), 2) if (h[i] @ h[j]) >= 2)
    faces = list(c.faces)
    faces[j] = dataclasses.replace(faces[j], color=faces[i].color)
    bad = dataclasses.replace(c, faces=tuple(faces) if isinstance(c.faces, tuple) else faces)
    assert any(m.startswith("coloring") for m in validate_code(bad))


def test_json_export_roundtrips_supports():
    c = code("C488", 5)
    doc = json.loads(code_to_json(c))
    assert doc["family"] == "C488" and doc["distance"] == 5
    assert [tuple(f["support"]) for f in doc["faces"]] == [tuple(f.support) for f in c.faces]
    assert len(doc["vertices"]) == c.n
    assert isinstance(c.faces[0], Face)
