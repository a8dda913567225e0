from __future__ import annotations

import numpy as np
import pytest

from artifact.circuit import (Circuit, Instruction, Layer, ScheduleConflict, ancilla_count,
                              build_estimation_circuit, build_flagged_cycle, build_memory_experiment,
                              build_single_ancilla_cycle, circuit_from_text, circuit_to_text, data_cnot_depth,
                              gadget_specs)
from artifact.decoder import detectors_from_bits
from artifact.tableau import reference_run

from conftest import code

# total qubits quoted in the lattice figure captions, evaluated by hand
TOTALS = {
    ("C488", "single_ancilla"): {3: 10, 5: 25, 7: 46},
    ("C666", "single_ancilla"): {3: 10, 5: 28, 7: 55},
    ("C488", "flagged"): {3: 13, 5: 35, 7: 67},
    ("C666", "flagged"): {3: 13, 5: 37, 7: 73},
}


@pytest.mark.parametrize("family,method", sorted(TOTALS))
@pytest.mark.parametrize("d", [3, 5, 7])
def test_total_qubits_match_captions(family, method, d):
    circ = build_memory_experiment(code(family, d), method, "X", rounds=1)
    assert circ.num_qubits == TOTALS[(family, method)][d]


@pytest.mark.parametrize("family,depth", [("C488", 8), ("C666", 6)])
@pytest.mark.parametrize("basis", ["X", "Z"])
def test_single_ancilla_depth(family, depth, basis):
    c = code(family, 3)
    frag = build_single_ancilla_cycle(c, basis)
    assert data_cnot_depth(frag) == depth
    assert ancilla_count(frag) == 3


@pytest.mark.parametrize("family", ["C488", "C666"])
@pytest.mark.parametrize("d", [3, 5, 7])
def test_flagged_depth_three_and_gadget_degree(family, d):
    c = code(family, d)
    frag = build_flagged_cycle(c, "X")
    assert data_cnot_depth(frag) == 3
    for spec in gadget_specs(c, "flagged"):
        face = c.faces[spec.face]
        touched = [q for part in spec.partition for q in part]
        assert sorted(touched) == sorted(face.support)
        assert all(len(part) <= 3 for part in spec.partition)
        if face.weight == 8:
            assert spec.kind == "four_qubit_flag" and all(len(part) == 2 for part in spec.partition)
        else:
            assert spec.kind == "two_qubit_flag"


def test_memory_measurement_map_counts():
    c = code("C488", 3)
    circ = build_memory_experiment(c, "flagged", "X")
    assert len(circ.select("syndrome", "X")) == 9
    assert len(circ.select("syndrome", "Z")) == 9
    assert len(circ.select("final_data")) == 7
    assert len(circ.select("flag")) == 2 * 3 * 3  # one flag per gadget, both bases, three rounds


@pytest.mark.parametrize("family,d", [("C488", 3), ("C488", 5), ("C666", 3), ("C666", 5)])
@pytest.mark.parametrize("method", ["single_ancilla", "flagged"])
@pytest.mark.parametrize("basis", ["X", "Z"])
def test_noiseless_memory_is_quiet(family, d, method, basis):
    c = code(family, d)
    circ = build_memory_experiment(c, method, basis)
    ref = reference_run(circ)
    bits = ref.outcomes[None, :].astype(bool)
    assert not detectors_from_bits(c, circ, bits, basis).any()
    flags = [m.index for m in circ.select("flag")]
    assert not ref.outcomes[flags].any() and ref.deterministic[flags].all()
    # every measurement that enters a detector is deterministic
    same = [m.index for m in circ.select("syndrome", basis)]
    later = [m.index for m in circ.select("syndrome", basis) if m.time > 1]
    assert ref.deterministic[later].all()
    assert len(same) == d * c.num_faces


@pytest.mark.parametrize("side", ["CX", "CZ"])
@pytest.mark.parametrize("family", ["C488", "C666"])
def test_estimation_circuits_deterministic_zero(side, family):
    c = code(family, 5)
    circ = build_estimation_circuit(c, side)
    ref = reference_run(circ)
    assert ref.deterministic.all()
    assert not ref.outcomes.any()
    assert len(circ.select("final_data")) == c.n


def test_layers_are_disjoint_and_idles_fill():
    circ = build_memory_experiment(code("C666", 5), "flagged", "Z")
    for layer in circ.layers:
        qs = layer.qubits()
        assert len(qs) == len(set(qs))
    inner = [l for l in circ.layers if " data" in l.tag]
    assert all(len(l.qubits()) == circ.num_qubits for l in inner)


def test_conflicting_layer_rejected():
    bad = Circuit(2, ("data", "data"), (Layer((Instruction("cnot", (0, 1)), Instruction("idle", (1,))), "x"),),
                  (), (), {})
    with pytest.raises(ScheduleConflict):
        bad.check()


def test_text_roundtrip():
    circ = build_memory_experiment(code("C488", 5), "flagged", "Z", rounds=2)
    text = circuit_to_text(circ)
    back = circuit_from_text(text)
    assert circuit_to_text(back) == text
    assert back.num_measurements == circ.num_measurements


def test_ancilla_reprepared_each_half_cycle():
    circ = build_memory_experiment(code("C488", 3), "flagged", "X", rounds=2)
    anc = [q for q, r in enumerate(circ.roles) if r != "data"]
    preps = np.zeros(circ.num_qubits, int)
    meas = np.zeros(circ.num_qubits, int)
    for layer in circ.layers:
        for ins in layer.instructions:
            if ins.op.startswith("prepare"):
                preps[ins.targets[0]] += 1
            elif ins.op.startswith("measure"):
                meas[ins.targets[0]] += 1
    assert (preps[anc] == 4).all() and (meas[anc] == 4).all()
