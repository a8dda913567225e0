"""Stabilizer tableau simulation (Aaronson-Gottesman CHP) for reference runs."""

from __future__ import annotations

import numpy as np

from .circuit import Circuit

__all__ = ["Tableau", "ReferenceRun", "reference_run"]


class Tableau:
    """CHP tableau over ``n`` qubits, initialised to |0...0>.

    Rows ``0..n-1`` are destabilizers and rows ``n..2n-1`` stabilizers.
    """

    def __init__(self, n: int):
        self.n = n
        self.x = np.zeros((2 * n, n), dtype=bool)
        self.z = np.zeros((2 * n, n), dtype=bool)
        self.r = np.zeros(2 * n, dtype=bool)
        idx = np.arange(n)
        self.x[idx, idx] = True
        self.z[n + idx, idx] = True

    # -- gates -------------------------------------------------------------
    def h(self, a: int) -> None:
        self.r ^= self.x[:, a] & self.z[:, a]
        xa = self.x[:, a].copy()
        self.x[:, a] = self.z[:, a]
        self.z[:, a] = xa

    def cnot(self, a: int, b: int) -> None:
        x, z = self.x, self.z
        self.r ^= x[:, a] & z[:, b] & ~(x[:, b] ^ z[:, a])
        x[:, b] ^= x[:, a]
        z[:, a] ^= z[:, b]

    def pauli_x(self, a: int) -> None:
        self.r ^= self.z[:, a]

    def pauli_z(self, a: int) -> None:
        self.r ^= self.x[:, a]

    # -- measurement -------------------------------------------------------
    @staticmethod
    def _g(x1, z1, x2, z2):
        x1 = x1.astype(np.int64)
        z1 = z1.astype(np.int64)
        x2 = x2.astype(np.int64)
        z2 = z2.astype(np.int64)
        return (x1 * z1 * (z2 - x2)
                + x1 * (1 - z1) * z2 * (2 * x2 - 1)
                + (1 - x1) * z1 * x2 * (1 - 2 * z2))

    def _rowsum(self, targets: np.ndarray, src: int) -> None:
        if targets.size == 0:
            return
        g = self._g(self.x[src], self.z[src], self.x[targets], self.z[targets]).sum(axis=1)
        total = 2 * self.r[targets].astype(np.int64) + 2 * int(self.r[src]) + g
        self.r[targets] = (total % 4) == 2
        self.x[targets] ^= self.x[src]
        self.z[targets] ^= self.z[src]

    def measure(self, a: int, forced: int = 0) -> tuple[int, bool]:
        """Measure Z on qubit ``a``; returns (outcome, deterministic).

        Random outcomes are resolved to ``forced``.
        """
        n = self.n
        hits = np.nonzero(self.x[n:, a])[0]
        if hits.size:
            p = n + int(hits[0])
            others = np.nonzero(self.x[:, a])[0]
            others = others[others != p]
            self._rowsum(others, p)
            self.x[p - n] = self.x[p]
            self.z[p - n] = self.z[p]
            self.r[p - n] = self.r[p]
            self.x[p] = False
            self.z[p] = False
            self.z[p, a] = True
            self.r[p] = bool(forced)
            return int(forced), False
        sx = np.zeros(n, dtype=bool)
        sz = np.zeros(n, dtype=bool)
        sr = 0
        for i in np.nonzero(self.x[:n, a])[0]:
            j = n + int(i)
            g = int(self._g(self.x[j], self.z[j], sx, sz).sum())
            total = 2 * sr + 2 * int(self.r[j]) + g
            sr = 1 if total % 4 == 2 else 0
            sx ^= self.x[j]
            sz ^= self.z[j]
        return sr, True

    def reset(self, a: int) -> None:
        out, _ = self.measure(a)
        if out:
            self.pauli_x(a)


class ReferenceRun:
    """Noiseless outcomes of every measurement and whether each is deterministic."""

    def __init__(self, outcomes: np.ndarray, deterministic: np.ndarray):
        self.outcomes = outcomes
        self.deterministic = deterministic


def reference_run(circuit: Circuit) -> ReferenceRun:
    """Run the circuit noiselessly on a tableau, resolving random outcomes to 0.

    Raises
    ------
    ValueError
        On an instruction outside the supported Clifford set.
    """
    t = Tableau(circuit.num_qubits)
    out = np.zeros(circuit.num_measurements, dtype=np.uint8)
    det = np.zeros(circuit.num_measurements, dtype=bool)
    for layer in circuit.layers:
        for ins in layer.instructions:
            op = ins.op
            if op == "idle":
                continue
            if op == "cnot":
                t.cnot(*ins.targets)
            elif op == "hadamard":
                t.h(ins.targets[0])
            elif op == "prepare_0":
                t.reset(ins.targets[0])
            elif op == "prepare_plus":
                t.reset(ins.targets[0])
                t.h(ins.targets[0])
            elif op == "measure_z":
                out[ins.meas], det[ins.meas] = t.measure(ins.targets[0])
            elif op == "measure_x":
                q = ins.targets[0]
                t.h(q)
                out[ins.meas], det[ins.meas] = t.measure(q)
                t.h(q)
            else:
                raise ValueError(f"non-Clifford or unknown instruction {op!r}")
    return ReferenceRun(out, det)
