from __future__ import annotations

import functools
import math

import numpy as np
import pytest

from artifact.circuit import build_memory_experiment
from artifact.noise import NoiseModel
from artifact.weights import (MIN_PATTERN_COUNT, ConditionalProbTable, WeightBuilder, build_weights,
                              estimate_conditional_probs, logit_weight)

from conftest import code


@functools.lru_cache(maxsize=None)
def table(family, d, p, side, samples=60_000, deflag=True, seed=17):
    return estimate_conditional_probs(code(family, d), side, NoiseModel(p), samples, seed, deflag=deflag)


def test_logit_weight_values():
    assert logit_weight(0.5) == 0.0
    assert math.isclose(logit_weight(1e-3), math.log(999), rel_tol=1e-12)
    assert logit_weight(1e-4) > logit_weight(1e-2)
    assert logit_weight(0.9) < 0
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            logit_weight(bad)


@pytest.mark.parametrize("side", ["CX", "CZ"])
def test_counts_sum_to_samples_and_marginals_consistent(side):
    t = table("C488", 3, 5e-3, side)
    assert t.basis == ("X" if side == "CX" else "Z")
    for counts, errors, width in zip(t.data_counts + t.meas_counts, t.data_errors + t.meas_errors,
                                     t.data_width + t.meas_width):
        assert counts.size == 1 << width
        assert counts.sum() == t.samples
        assert (errors <= counts).all()
    for v in range(len(t.data_counts)):
        raw = t.raw_data(v)
        seen = t.data_counts[v] > 0
        assert np.isclose((t.data_counts[v][seen] * raw[seen]).sum(), t.data_errors[v].sum())


def test_zero_noise_gives_zero_raw_rates():
    t = table("C666", 3, 0.0, "CZ", samples=4096)
    for v in range(len(t.data_counts)):
        assert np.nansum(t.raw_data(v)) == 0
    for f in range(len(t.meas_counts)):
        assert np.nansum(t.raw_meas(f)) == 0
    # only the all-zero pattern is ever seen without noise
    assert all(c[0] == t.samples for c in t.data_counts)


def test_smoothing_and_fallback():
    t = table("C488", 3, 5e-3, "CX")
    for v in range(len(t.data_counts)):
        counts, errors = t.data_counts[v], t.data_errors[v]
        prob = t.data_prob(v)
        base = (errors.sum() + 1) / (counts.sum() + 2)
        assert math.isclose(t.data_marginal(v), base)
        rich = counts >= MIN_PATTERN_COUNT
        assert np.allclose(prob[rich], (errors[rich] + 1) / (counts[rich] + 2))
        assert np.allclose(prob[~rich], base)
        assert ((prob > 0) & (prob < 1)).all()


def test_chunking_invariant_and_merge_additive():
    c, noise = code("C488", 3), NoiseModel(5e-3)
    a = estimate_conditional_probs(c, "CZ", noise, 8192, 3, chunk=2048)
    b = estimate_conditional_probs(c, "CZ", noise, 8192, 3, chunk=8192)
    assert a.to_json() == b.to_json()
    other = estimate_conditional_probs(c, "CZ", noise, 4096, 4)
    merged = a.merge(other)
    assert merged.samples == a.samples + other.samples
    for m, x, y in zip(merged.data_errors + merged.meas_counts, a.data_errors + a.meas_counts,
                       other.data_errors + other.meas_counts):
        assert np.array_equal(m, x + y)
    with pytest.raises(ValueError):
        a.merge(table("C488", 3, 5e-3, "CX"))


def test_json_roundtrip(tmp_path):
    t = table("C488", 3, 5e-3, "CX")
    path = tmp_path / "t.json"
    t.save(path)
    back = ConditionalProbTable.load(path)
    assert back.to_json() == t.to_json()
    assert back.deflag and back.family == "C488" and back.samples == t.samples
    for x, y in zip(back.data_errors, t.data_errors):
        assert np.array_equal(x, y)


def test_rejects_zero_samples():
    with pytest.raises(ValueError):
        estimate_conditional_probs(code("C488", 3), "CX", NoiseModel(1e-3), 0, 1)


def test_uniform_weights_are_one():
    c = code("C488", 3)
    circ = build_memory_experiment(c, "single_ancilla", "Z")
    w = build_weights(c, circ, "uniform", "Z")
    assert w.data.shape == (4, 7) and w.meas.shape == (3, 3)
    assert (w.data == 1).all() and (w.meas == 1).all()


@pytest.mark.parametrize("basis", ["X", "Z"])
def test_zero_flags_use_all_zero_pattern(basis):
    c = code("C488", 3)
    circ = build_memory_experiment(c, "flagged", basis)
    t = table("C488", 3, 5e-3, "CX" if basis == "X" else "CZ")
    w = build_weights(c, circ, "flagged", basis, None, t)
    conv = build_weights(c, circ, "conventional", basis, None, t)
    zero_pattern = np.array([logit_weight(t.data_prob(v)[0]) for v in range(c.n)])
    unconditioned = {3: 0} if basis == "X" else {0: 0}
    for row in range(4):
        expect = conv.data[row] if row in unconditioned else zero_pattern
        assert np.allclose(w.data[row], expect)
    assert np.allclose(w.meas, [logit_weight(t.meas_prob(f)[0]) for f in range(c.num_faces)])


def test_single_flag_changes_only_local_weights():
    c = code("C488", 5)
    circ = build_memory_experiment(c, "flagged", "X")
    t = table("C488", 5, 5e-3, "CX", samples=200_000)
    wb = WeightBuilder(c, circ, "flagged", "X", t)
    base = np.zeros(circ.num_measurements, dtype=bool)
    w0 = wb.single(base)
    for m in circ.select("flag"):
        if m.time != 2:
            continue
        bits = base.copy()
        bits[m.index] = True
        w1 = wb.single(bits)
        dd = np.argwhere(~np.isclose(w1.data, w0.data))
        dm = np.argwhere(~np.isclose(w1.meas, w0.meas))
        support = set(c.faces[m.face].support)
        if m.basis == "X":  # X-gadget flags inform data weights of the same round
            assert not dm.size
            assert all(r == 1 and v in support for r, v in dd)
        else:  # Z-gadget flags inform that face's measurement weight
            assert not dd.size
            assert all(r == 1 and f == m.face for r, f in dm)


def test_z_decoding_uses_previous_round_flags():
    c = code("C488", 3)
    circ = build_memory_experiment(c, "flagged", "Z")
    t = table("C488", 3, 5e-3, "CZ")
    wb = WeightBuilder(c, circ, "flagged", "Z", t)
    base = np.zeros(circ.num_measurements, dtype=bool)
    w0 = wb.single(base)
    m = next(m for m in circ.select("flag", "Z") if m.time == 1)
    bits = base.copy()
    bits[m.index] = True
    changed_rows = {int(r) for r, _ in np.argwhere(~np.isclose(wb.single(bits).data, w0.data))}
    assert changed_rows == {1}


def test_weight_builder_validates_inputs():
    c = code("C488", 3)
    circ = build_memory_experiment(c, "flagged", "X")
    with pytest.raises(ValueError):
        WeightBuilder(c, circ, "flagged", "X", None)
    with pytest.raises(ValueError):
        WeightBuilder(c, circ, "flagged", "X", table("C488", 3, 5e-3, "CZ"))
    with pytest.raises(ValueError):
        WeightBuilder(c, circ, "fancy", "X", None)
    single = build_memory_experiment(c, "single_ancilla", "X")
    with pytest.raises(ValueError):
        WeightBuilder(c, single, "flagged", "X", table("C488", 3, 5e-3, "CX"))
