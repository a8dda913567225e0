"""Flag-triggered Pauli-frame corrections.

When a gadget's flags report a dangerous ancilla fault, the spread error on
the data is undone by a classical frame update applied right after the gadget
is read out:

* two-qubit gadget: if the flag fires, apply the gadget's Pauli to every data
  qubit touched by the syndrome qubit;
* four-qubit gadget: only if all three flags fire, apply it to every data qubit
  touched by the syndrome qubit and by the top flag.

X-type gadgets spread X errors and therefore correct with X; Z-type gadgets
correct with Z.  Data Paulis never flip flag outcomes, so the updates commute
with each other and their combined effect on later measurements is a plain XOR.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuit import Circuit, GadgetInstance
from .noise import FaultModel, ShotBatch

__all__ = ["DeflagRule", "rule_for", "deflag_update", "Deflagger", "apply_deflagging", "rules_table"]


@dataclass(frozen=True)
class DeflagRule:
    """Trigger condition and correction for one gadget kind and basis."""

    kind: str
    basis: str
    trigger: str  # "any" for a single flag, "all" for three flags
    pauli: str
    targets: tuple[int, ...]

    def fires(self, flags) -> bool:
        flags = [int(f) for f in flags]
        if self.trigger == "any":
            return bool(flags[0])
        return all(flags)


def rule_for(gadget: GadgetInstance) -> DeflagRule:
    if gadget.kind == "two_qubit_flag":
        trigger = "any"
    elif gadget.kind == "four_qubit_flag":
        trigger = "all"
    else:
        raise ValueError(f"no deflag rule for gadget kind {gadget.kind!r}")
    return DeflagRule(gadget.kind, gadget.basis, trigger, gadget.basis, gadget.deflag_targets)


def deflag_update(flags, rule: DeflagRule) -> dict[int, str]:
    """Frame update (qubit -> Pauli) requested by one gadget's flag bits."""
    if rule.kind not in ("two_qubit_flag", "four_qubit_flag"):
        raise ValueError(f"unknown gadget kind {rule.kind!r}")
    if not rule.fires(flags):
        return {}
    return {q: rule.pauli for q in rule.targets}


class Deflagger:
    """Precomputed deflag corrections for every gadget instance of a circuit."""

    def __init__(self, circuit: Circuit, model: FaultModel):
        self.circuit = circuit
        self.instances = list(circuit.gadgets)
        self.rules = [rule_for(g) for g in self.instances]
        n_meas = circuit.num_measurements
        eff = np.zeros((len(self.instances), n_meas), dtype=bool)
        for i, (g, rule) in enumerate(zip(self.instances, self.rules)):
            for q in rule.targets:
                eff[i] ^= model.pauli_effect(g.deflag_layer, q, rule.pauli)
        self.effects = eff
        self._flag_idx = [list(g.flag_meas) for g in self.instances]

    def triggers(self, bits: np.ndarray) -> np.ndarray:
        """Bool array (shots, instances) of fired deflag rules."""
        bits = np.atleast_2d(bits)
        out = np.zeros((bits.shape[0], len(self.instances)), dtype=bool)
        for i, (idx, rule) in enumerate(zip(self._flag_idx, self.rules)):
            sub = bits[:, idx]
            out[:, i] = sub[:, 0] if rule.trigger == "any" else sub.all(axis=1)
        return out

    def correction(self, bits: np.ndarray) -> np.ndarray:
        """Measurement flips produced by the deflag updates of each shot."""
        trig = self.triggers(bits).astype(np.float32)
        return ((trig @ self.effects.astype(np.float32)).astype(np.int64) & 1).astype(bool)

    def apply(self, batch: ShotBatch) -> ShotBatch:
        corr = self.correction(batch.bits)
        return ShotBatch(batch.circuit, batch.bits ^ corr, batch.flips ^ corr, batch.fault_log)


def apply_deflagging(batch: ShotBatch, model: FaultModel) -> ShotBatch:
    """Return the batch as seen after all deflag frame updates."""
    return Deflagger(batch.circuit, model).apply(batch)


def rules_table(circuit: Circuit) -> str:
    """Human-readable list of the deflag rule of every gadget of one half-cycle."""
    lines = ["face\tbasis\tkind\ttrigger\tpauli\ttargets"]
    seen = set()
    for g in circuit.gadgets:
        key = (g.face, g.basis)
        if key in seen:
            continue
        seen.add(key)
        r = rule_for(g)
        trig = "flag" if r.trigger == "any" else "all three flags"
        lines.append(f"{g.face}\t{g.basis}\t{g.kind}\t{trig}\t{r.pauli}\t{' '.join(map(str, r.targets))}")
    return "\n".join(lines) + "\n"
