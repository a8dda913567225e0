"""Invariant suite run by ``artifact validate``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuit import build_estimation_circuit, build_memory_experiment
from .decoder import detectors_from_bits, final_data_bits
from .geometry import (SearchBudgetExceeded, build_color_code, expected_data_qubits, expected_faces,
                       min_logical_weight, validate_code)
from .noise import FrameSampler, NoiseModel
from .tableau import reference_run

__all__ = ["Check", "validate_family"]


@dataclass
class Check:
    name: str
    ok: bool
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.ok else 'FAIL'}  {self.name}" + (f"  ({self.detail})" if self.detail else "")


def _code_checks(family: str, d: int, distance_search: bool) -> list[Check]:
    code = build_color_code(family, d)
    tag = f"{family} d={d}"
    out = []
    problems = validate_code(code)
    out.append(Check(f"{tag} code structure", not problems, "; ".join(problems[:3])))
    counts_ok = code.n == expected_data_qubits(code.family, d) and len(code.faces) == expected_faces(code.family, d)
    out.append(Check(f"{tag} qubit and face counts", counts_ok, f"n={code.n}, faces={len(code.faces)}"))
    if distance_search:
        for kind in ("X", "Z"):
            try:
                w = min_logical_weight(code, kind)
                out.append(Check(f"{tag} minimum {kind} logical weight", w == d, f"found {w}"))
            except SearchBudgetExceeded as exc:
                out.append(Check(f"{tag} minimum {kind} logical weight", False, str(exc)))
    return out


def _circuit_checks(family: str, d: int, shots: int, seed: int) -> list[Check]:
    code = build_color_code(family, d)
    tag = f"{family} d={d}"
    out = []
    for method in ("single_ancilla", "flagged"):
        for basis in ("X", "Z"):
            name = f"{tag} {method} {basis}-memory"
            circ = build_memory_experiment(code, method, basis)
            try:
                circ.check()
            except Exception as exc:  # noqa: BLE001 - reported, not raised
                out.append(Check(f"{name} schedule", False, str(exc)))
                continue
            batch = FrameSampler(circ, NoiseModel(0.0)).sample(shots, seed)
            det = detectors_from_bits(code, circ, batch.bits, basis)
            flags = batch.bits[:, [m.index for m in circ.select("flag")]] if circ.gadgets else np.zeros((1, 0))
            fin = final_data_bits(circ, batch.bits).astype(np.int64)
            logical = code.logical_vector("Z" if basis == "X" else "X").astype(np.int64)
            fails = int(((fin @ logical) & 1).sum())
            ok = not det.any() and not flags.any() and fails == 0
            out.append(Check(f"{name} noiseless run", ok,
                             f"detectors={int(det.sum())}, flags={int(flags.sum())}, failures={fails}"))
    for side in ("CX", "CZ"):
        circ = build_estimation_circuit(code, side)
        circ.check()
        ref = reference_run(circ)
        out.append(Check(f"{tag} estimation circuit {side} deterministic", bool(ref.deterministic.all())))
    return out


def validate_family(family: str, distances, shots: int = 1000, seed: int = 0,
                    distance_search: bool = True) -> list[Check]:
    """Structural, schedule and noiseless-run checks for each distance."""
    checks = []
    for d in distances:
        checks += _code_checks(family, int(d), distance_search)
        checks += _circuit_checks(family, int(d), shots, seed)
    return checks
