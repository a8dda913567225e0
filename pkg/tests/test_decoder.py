from __future__ import annotations

import numpy as np
import pytest

from artifact.circuit import build_memory_experiment
from artifact.decoder import (DecodingInstance, DecodingSolution, IlpDecoder, brute_force_decode, build_instance,
                              decode, instance_from_text, instance_to_text, judge_logical_error, parity_matrix)
from artifact.weights import build_weights

from conftest import code


def random_instance(rng, h, rounds, negative=False):
    nf, n = h.shape
    det = rng.integers(0, 2, size=(rounds + 1, nf)).astype(np.uint8)
    lo = -2.0 if negative else 0.1
    wd = rng.uniform(lo, 8.0, size=(rounds + 1, n))
    wm = rng.uniform(lo, 8.0, size=(rounds, nf))
    return DecodingInstance(h, det, wd, wm, "Z")


def test_parity_matrix_shape_and_degrees():
    h = code("C488", 3).check_matrix()
    a = parity_matrix(h, 2).toarray()
    assert a.shape == (3 * 3, 3 * 7 + 2 * 3)
    # interior rounds touch two measurement variables, the edges one
    assert (a[:3, 21:].sum(axis=1) == 1).all()
    assert (a[3:6, 21:].sum(axis=1) == 2).all()
    assert (a[6:, 21:].sum(axis=1) == 1).all()


@pytest.mark.parametrize("negative", [False, True])
def test_matches_brute_force(negative):
    rng = np.random.default_rng(7 + negative)
    h = code("C488", 3).check_matrix()
    dec = IlpDecoder(h, 1)
    for _ in range(150):
        inst = random_instance(rng, h, 1, negative)
        assert inst.num_binaries == 17
        sol = dec.decode(inst)
        ref = brute_force_decode(inst)
        assert sol.status == "optimal"
        assert inst.satisfied(sol.x, sol.r)
        assert np.isclose(sol.objective, ref.objective, atol=1e-9)


def test_every_detector_pattern_is_feasible():
    h = code("C666", 3).check_matrix()
    dec = IlpDecoder(h, 0)
    for k in range(8):
        det = np.array([[(k >> f) & 1 for f in range(3)]], dtype=np.uint8)
        inst = DecodingInstance(h, det, np.ones((1, 7)), np.zeros((0, 3)))
        sol = dec.decode(inst)
        assert sol.status == "optimal" and inst.satisfied(sol.x, sol.r)
        assert sol.objective == (0 if k == 0 else 1)


def test_weight_scale_invariance():
    rng = np.random.default_rng(3)
    h = code("C488", 3).check_matrix()
    for _ in range(30):
        inst = random_instance(rng, h, 2)
        scaled = DecodingInstance(h, inst.detectors, inst.w_data * 3.7, inst.w_meas * 3.7, "Z")
        a = decode(inst)
        b = decode(scaled)
        assert np.isclose(b.objective, 3.7 * a.objective)
        assert np.isclose(inst.objective(b.x, b.r), a.objective)


def test_memo_and_trivial_paths():
    h = code("C488", 3).check_matrix()
    dec = IlpDecoder(h, 1)
    zero = DecodingInstance(h, np.zeros((2, 3), np.uint8), np.ones((2, 7)), np.ones((1, 3)))
    assert dec.decode(zero).objective == 0
    inst = random_instance(np.random.default_rng(0), h, 1)
    first, second = dec.decode(inst), dec.decode(inst)
    assert np.array_equal(first.x, second.x) and first.objective == second.objective
    assert dec.stats["trivial"] == 1 and dec.stats["cached"] == 1 and dec.stats["solved"] == 1


def test_judge_logical_error():
    c = code("C488", 5)
    n = c.n
    truth = np.zeros(n, np.uint8)
    truth[[0, 3]] = 1
    x = np.zeros((1, n), np.uint8)
    x[0, [0, 3]] = 1
    exact = DecodingSolution(x, np.zeros((0, c.num_faces), np.uint8), 2.0, "optimal")
    assert judge_logical_error(exact, truth, c, "Z") == 0
    stab = np.zeros((1, n), np.uint8)
    stab[0] = (x[0] + c.check_matrix()[2]) % 2
    assert judge_logical_error(DecodingSolution(stab, exact.r, 0.0, "optimal"), truth, c, "Z") == 0
    logical = np.zeros((1, n), np.uint8)
    logical[0] = (x[0] + c.logical_vector("X")) % 2
    assert judge_logical_error(DecodingSolution(logical, exact.r, 0.0, "optimal"), truth, c, "Z") == 1
    assert judge_logical_error(DecodingSolution(logical, exact.r, 0.0, "optimal"), truth, c, "X") == 1


def test_text_roundtrip():
    rng = np.random.default_rng(1)
    h = code("C666", 3).check_matrix()
    inst = random_instance(rng, h, 2, negative=True)
    back = instance_from_text(instance_to_text(inst))
    assert np.array_equal(back.h, inst.h)
    assert np.array_equal(back.detectors, inst.detectors)
    assert np.array_equal(back.w_data, inst.w_data) and np.array_equal(back.w_meas, inst.w_meas)
    assert instance_to_text(back) == instance_to_text(inst)


def test_build_instance_validates():
    c = code("C488", 3)
    circ = build_memory_experiment(c, "single_ancilla", "X")
    w = build_weights(c, circ, "uniform", "X")
    bits = np.zeros(circ.num_measurements, dtype=bool)
    inst = build_instance(c, circ, bits, w, "X")
    assert inst.detectors.shape == (4, 3)
    with pytest.raises(ValueError):
        build_instance(c, circ, bits, w, "Z")
    with pytest.raises(ValueError):
        build_instance(c, circ, bits[:-1], w, "X")
    with pytest.raises(ValueError):
        DecodingInstance(c.check_matrix(), np.zeros((2, 3)), np.ones((3, 7)), np.ones((1, 3))).check()
