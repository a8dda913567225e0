"""Circuit-level depolarizing noise and Pauli-frame sampling.

Every single Pauli fault at every location is pushed through the circuit once,
in a batch, to obtain the set of measurements it flips.  A noisy shot is then
the XOR of the flip patterns of its sampled faults on top of the noiseless
reference outcomes.  Random "gauge" Paulis that stabilize freshly prepared
qubits are mixed in so that nondeterministic measurements come out uniformly
random, as in a real run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuit import Circuit
from .tableau import ReferenceRun, reference_run

__all__ = [
    "NoiseModel",
    "FaultChannel",
    "FaultModel",
    "ShotRecord",
    "ShotBatch",
    "FrameSampler",
    "compile_faults",
    "propagate_paulis",
    "sample_shot",
    "exhaustive_single_fault_enumeration",
    "sample_single_qubit_channel",
    "PAULI2",
]

_P1 = ("X", "Y", "Z")
PAULI2 = tuple((a, b) for a in "IXYZ" for b in "IXYZ" if (a, b) != ("I", "I"))


@dataclass(frozen=True)
class NoiseModel:
    """Uniform circuit-level depolarizing noise of strength ``p``.

    Single-qubit gates and idles are followed by X, Y or Z with probability
    ``p/3`` each, CNOTs by one of the 15 nontrivial two-qubit Paulis with
    probability ``p/15`` each, preparations flip to the orthogonal state and
    measurements report the wrong outcome with probability ``p``.
    """

    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")


def sample_single_qubit_channel(p: float, draws: int, seed: int) -> np.ndarray:
    """Draw ``draws`` outcomes of the single-qubit channel: 0=I, 1=X, 2=Y, 3=Z."""
    rng = np.random.Generator(np.random.Philox(seed))
    fire = rng.random(draws) < p
    out = np.zeros(draws, dtype=np.int8)
    out[fire] = rng.integers(1, 4, size=int(fire.sum()))
    return out


# ---------------------------------------------------------------------------
# propagation


def propagate_paulis(circuit: Circuit, injections: list[tuple[int, int, str]]) -> np.ndarray:
    """Measurement flips caused by each injected Pauli.

    Parameters
    ----------
    injections : list of (layer, qubit, pauli)
        Pauli ``"X"``, ``"Y"`` or ``"Z"`` inserted right after ``layer``.

    Returns
    -------
    ndarray of bool, shape (len(injections), num_measurements)
    """
    g = len(injections)
    nq = circuit.num_qubits
    fx = np.zeros((nq, g), dtype=bool)
    fz = np.zeros((nq, g), dtype=bool)
    eff = np.zeros((circuit.num_measurements, g), dtype=bool)
    by_layer: dict[int, list[int]] = {}
    for i, (layer, _, _) in enumerate(injections):
        by_layer.setdefault(layer, []).append(i)
    for li, layer in enumerate(circuit.layers):
        for ins in layer.instructions:
            op = ins.op
            if op == "cnot":
                c, t = ins.targets
                fx[t] ^= fx[c]
                fz[c] ^= fz[t]
            elif op == "hadamard":
                q = ins.targets[0]
                tmp = fx[q].copy()
                fx[q] = fz[q]
                fz[q] = tmp
            elif op == "measure_z":
                eff[ins.meas] = fx[ins.targets[0]]
            elif op == "measure_x":
                eff[ins.meas] = fz[ins.targets[0]]
            elif op in ("prepare_0", "prepare_plus"):
                q = ins.targets[0]
                fx[q] = False
                fz[q] = False
        for i in by_layer.get(li, ()):
            _, q, pauli = injections[i]
            if pauli in ("X", "Y"):
                fx[q, i] ^= True
            if pauli in ("Z", "Y"):
                fz[q, i] ^= True
    return eff.T.copy()


@dataclass
class FaultChannel:
    """A group of independent channels of one arity.

    ``prob[c]`` is the chance that channel ``c`` fires; when it fires one of its
    ``k`` outcomes is chosen uniformly and ``effects[c, o]`` gives the packed
    measurement flips.  ``labels`` describe each channel for fault logs.
    """

    name: str
    prob: np.ndarray
    effects: np.ndarray  # (n_channels, k, words) uint64
    labels: list = field(default_factory=list)
    outcome_names: tuple = ()


@dataclass
class FaultModel:
    circuit: Circuit
    noise: NoiseModel
    channels: list[FaultChannel]
    gauges: np.ndarray  # (n_gauge, n_meas) bool
    words: int
    generator_effects: np.ndarray = field(repr=False, default=None)  # (n_gen, n_meas) bool
    generator_index: dict = field(repr=False, default_factory=dict)

    def pauli_effect(self, layer: int, qubit: int, pauli: str) -> np.ndarray:
        """Measurement flips caused by a Pauli inserted after ``layer``."""
        out = np.zeros(self.circuit.num_measurements, dtype=bool)
        if pauli in ("X", "Y"):
            out ^= self.generator_effects[self.generator_index[(layer, qubit, "X")]]
        if pauli in ("Z", "Y"):
            out ^= self.generator_effects[self.generator_index[(layer, qubit, "Z")]]
        return out


def _pack(bits: np.ndarray, words: int) -> np.ndarray:
    """Pack bool rows (..., n) into little-endian uint64 words (..., words)."""
    shape = bits.shape[:-1]
    flat = bits.reshape(-1, bits.shape[-1])
    pad = words * 64 - flat.shape[1]
    if pad:
        flat = np.hstack([flat, np.zeros((flat.shape[0], pad), dtype=bool)])
    packed = np.packbits(flat, axis=1, bitorder="little").view(np.uint64)
    return packed.reshape(*shape, words)


def _unpack(words_arr: np.ndarray, n: int) -> np.ndarray:
    b = np.unpackbits(words_arr.view(np.uint8), axis=-1, bitorder="little")
    return b[..., :n].astype(bool)


def compile_faults(circuit: Circuit, noise: NoiseModel) -> FaultModel:
    """Enumerate every fault location of the circuit and its measurement flips."""
    p = noise.p
    inj: list[tuple[int, int, str]] = []
    one_q: list[tuple[int, int, str]] = []   # (layer, qubit, op)
    two_q: list[tuple[int, int, int]] = []   # (layer, control, target)
    preps: list[tuple[int, int, str]] = []   # (layer, qubit, flip pauli)
    gauges: list[int] = []
    meas: list[int] = []
    index: dict[tuple[int, int, str], int] = {}

    def col(layer, q, pauli):
        key = (layer, q, pauli)
        if key not in index:
            index[key] = len(inj)
            inj.append(key)
        return index[key]

    for li, layer in enumerate(circuit.layers):
        for ins in layer.instructions:
            if ins.op in ("idle", "hadamard"):
                q = ins.targets[0]
                col(li, q, "X")
                col(li, q, "Z")
                one_q.append((li, q, ins.op))
            elif ins.op == "cnot":
                for q in ins.targets:
                    col(li, q, "X")
                    col(li, q, "Z")
                two_q.append((li, *ins.targets))
            elif ins.op in ("prepare_0", "prepare_plus"):
                q = ins.targets[0]
                col(li, q, ins.flip)
                preps.append((li, q, ins.flip))
                gauges.append(col(li, q, "Z" if ins.op == "prepare_0" else "X"))
            else:
                meas.append(ins.meas)
    eff = propagate_paulis(circuit, inj)
    n_meas = circuit.num_measurements
    words = max(1, (n_meas + 63) // 64)

    def e(layer, q, pauli):
        if pauli == "I":
            return np.zeros(n_meas, dtype=bool)
        if pauli == "Y":
            return eff[index[(layer, q, "X")]] ^ eff[index[(layer, q, "Z")]]
        return eff[index[(layer, q, pauli)]]

    channels = []
    if one_q:
        arr = np.stack([np.stack([e(li, q, P) for P in _P1]) for li, q, _ in one_q])
        channels.append(FaultChannel("single", np.full(len(one_q), p), _pack(arr, words),
                                     [f"{op} L{li} q{q}" for li, q, op in one_q], _P1))
    if two_q:
        arr = np.stack([np.stack([e(li, c, a) ^ e(li, t, b) for a, b in PAULI2]) for li, c, t in two_q])
        channels.append(FaultChannel("cnot", np.full(len(two_q), p), _pack(arr, words),
                                     [f"cnot L{li} q{c},{t}" for li, c, t in two_q],
                                     tuple(a + b for a, b in PAULI2)))
    if preps:
        arr = np.stack([e(li, q, P)[None, :] for li, q, P in preps])
        channels.append(FaultChannel("prepare", np.full(len(preps), p), _pack(arr, words),
                                     [f"prepare L{li} q{q}" for li, q, _ in preps], ("flip",)))
    if meas:
        arr = np.zeros((len(meas), 1, n_meas), dtype=bool)
        arr[np.arange(len(meas)), 0, meas] = True
        channels.append(FaultChannel("measure", np.full(len(meas), p), _pack(arr, words),
                                     [f"measure m{m}" for m in meas], ("flip",)))
    # drop channels that can never flip anything
    for ch in channels:
        keep = ch.effects.reshape(len(ch.prob), -1).any(axis=1)
        ch.prob = ch.prob[keep]
        ch.effects = ch.effects[keep]
        ch.labels = [lab for lab, k in zip(ch.labels, keep) if k]
    g = eff[gauges] if gauges else np.zeros((0, n_meas), dtype=bool)
    g = g[g.any(axis=1)]
    return FaultModel(circuit, noise, channels, g, words, eff, index)


# ---------------------------------------------------------------------------
# shots


@dataclass
class ShotBatch:
    """Measurement records of many shots.

    ``bits[s, m]`` is the outcome of measurement ``m`` in shot ``s``;
    ``flips`` holds the part caused by faults (bits XOR reference).
    """

    circuit: Circuit
    bits: np.ndarray
    flips: np.ndarray
    fault_log: list | None = None

    @property
    def shots(self) -> int:
        return self.bits.shape[0]

    def record(self, s: int) -> "ShotRecord":
        log = self.fault_log[s] if self.fault_log is not None else None
        return ShotRecord(self.circuit, self.bits[s].copy(), self.flips[s].copy(), log)


@dataclass
class ShotRecord:
    """One shot: measurement outcomes organised by their meaning."""

    circuit: Circuit
    bits: np.ndarray
    flips: np.ndarray
    fault_log: list | None = None

    def syndromes(self, basis: str) -> np.ndarray:
        """Array (time, face) of ``basis``-type syndrome bits."""
        return _by_time_face(self.circuit, self.bits, "syndrome", basis)

    def flags(self, basis: str) -> dict[tuple[int, int, int], int]:
        """Map (time, face, position) -> flag bit for ``basis``-type gadgets."""
        return {(m.time, m.face, m.position): int(self.bits[m.index])
                for m in self.circuit.select("flag", basis)}

    def final_data(self) -> np.ndarray:
        idx = [m.index for m in self.circuit.select("final_data")]
        return self.bits[idx].astype(np.uint8)


def _by_time_face(circuit, bits, kind, basis):
    sel = circuit.select(kind, basis)
    if not sel:
        return np.zeros((0, 0), dtype=np.uint8)
    tmax = max(m.time for m in sel)
    fmax = max(m.face for m in sel)
    out = np.zeros((tmax, fmax + 1), dtype=np.uint8)
    for m in sel:
        out[m.time - 1, m.face] = bits[m.index]
    return out


class FrameSampler:
    """Samples noisy shots of a fixed circuit.

    The reference run and fault tables are computed once; every call to
    :meth:`sample` is a pure function of ``(seed, start)``: shot ``i`` of a batch
    starting at ``start`` always uses substream ``start + i`` of the master seed.
    """

    def __init__(self, circuit: Circuit, noise: NoiseModel, reference: ReferenceRun | None = None):
        self.circuit = circuit
        self.noise = noise
        self.reference = reference if reference is not None else reference_run(circuit)
        self.model = compile_faults(circuit, noise)
        self.n_meas = circuit.num_measurements

    def sample(self, shots: int, seed: int, start: int = 0, gauge: bool = True,
               log_faults: bool = False, block: int = 1024) -> ShotBatch:
        """Sample ``shots`` shots.

        Shots are drawn in blocks of ``block``; block ``b`` uses the RNG stream
        keyed by ``(seed, start // block + b)`` so results do not depend on how a
        run is split into calls, as long as ``start`` is block aligned.
        """
        if start % block:
            raise ValueError("start must be a multiple of block")
        parts = []
        logs: list | None = [] if log_faults else None
        for b0 in range(0, shots, block):
            nb = min(block, shots - b0)
            key = (start + b0) // block
            acc, lg = self._block(nb, seed, key, gauge, log_faults)
            parts.append(acc)
            if logs is not None:
                logs.extend(lg)
        acc = np.vstack(parts) if parts else np.zeros((0, self.model.words), dtype=np.uint64)
        flips = _unpack(acc, self.n_meas)
        bits = flips ^ self.reference.outcomes.astype(bool)[None, :]
        return ShotBatch(self.circuit, bits, flips, logs)

    def _block(self, nb, seed, key, gauge, log_faults):
        rng = np.random.Generator(np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF, key]))
        acc = np.zeros((nb, self.model.words), dtype=np.uint64)
        logs = [[] for _ in range(nb)] if log_faults else None
        for ch in self.model.channels:
            if ch.prob.size == 0 or self.noise.p == 0.0:
                continue
            fire = rng.random((nb, ch.prob.size)) < ch.prob[None, :]
            s, c = np.nonzero(fire)
            o = rng.integers(0, ch.effects.shape[1], size=s.size)
            np.bitwise_xor.at(acc, s, ch.effects[c, o])
            if logs is not None:
                for si, ci, oi in zip(s, c, o):
                    logs[si].append((ch.labels[ci], ch.outcome_names[oi]))
        if gauge and self.model.gauges.shape[0]:
            r = rng.integers(0, 2, size=(nb, self.model.gauges.shape[0])).astype(np.float32)
            par = (r @ self.model.gauges.astype(np.float32)).astype(np.int64) & 1
            acc ^= _pack(par.astype(bool), self.model.words)
        return acc, logs


def sample_shot(circuit: Circuit, noise: NoiseModel, seed: int, index: int = 0) -> ShotRecord:
    """Single shot; identical (circuit, noise, seed, index) give identical records."""
    sampler = FrameSampler(circuit, noise)
    block = sampler.sample(1, seed, start=index, block=1, log_faults=True)
    return block.record(0)


@dataclass(frozen=True)
class FaultEvent:
    channel: str
    label: str
    outcome: str
    probability: float
    flips: tuple[int, ...]


def exhaustive_single_fault_enumeration(circuit: Circuit, p: float = 1e-3, budget: int = 2_000_000) -> list[FaultEvent]:
    """Every single fault of the circuit together with the measurements it flips.

    Faults with no observable effect are omitted.

    Raises
    ------
    RuntimeError
        If the number of fault events exceeds ``budget``.
    """
    model = compile_faults(circuit, NoiseModel(p))
    total = sum(ch.effects.shape[0] * ch.effects.shape[1] for ch in model.channels)
    if total > budget:
        raise RuntimeError(f"{total} fault events exceed the enumeration budget {budget}")
    n = circuit.num_measurements
    events = []
    for ch in model.channels:
        k = ch.effects.shape[1]
        bits = _unpack(ch.effects, n)
        for c in range(ch.effects.shape[0]):
            for o in range(k):
                idx = np.nonzero(bits[c, o])[0]
                if idx.size:
                    events.append(FaultEvent(ch.name, ch.labels[c], ch.outcome_names[o],
                                             float(ch.prob[c]) / k, tuple(int(i) for i in idx)))
    return events
