"""Layered stabilizer-measurement circuits for color codes.

A circuit is a list of layers; each layer holds instructions acting on
disjoint qubits.  Every qubit that is not acted on in a layer receives an
explicit ``idle`` instruction so that idle noise is attached to it.

Two syndrome-extraction methods are provided:

* ``single_ancilla``: one ancilla per face, CNOT depth 8 for (4.8.8) and 6 for
  (6.6.6).  Each face talks to a qubit in the time slot given by the direction
  from the face center to that qubit, which is conflict free on both lattices.
* ``flagged``: a cat-state gadget per face.  Weight-4 and weight-6 faces use a
  two-qubit gadget (syndrome + one flag), weight-8 faces a four-qubit gadget
  (syndrome + three flags).  Each gadget qubit touches a contiguous chunk of
  the face boundary and the data CNOTs fit in exactly three layers.

Instructions on gadget qubits of a Z-type gadget are the Hadamard conjugates
of the X-type ones: preparation and measurement bases swap and every CNOT is
reversed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import ColorCode, Family

__all__ = [
    "SCHEDULE_VERSION",
    "OPS",
    "Instruction",
    "Layer",
    "MeasurementInfo",
    "GadgetSpec",
    "GadgetInstance",
    "Circuit",
    "ScheduleConflict",
    "gadget_specs",
    "build_single_ancilla_cycle",
    "build_flagged_cycle",
    "build_memory_experiment",
    "build_estimation_circuit",
    "circuit_to_text",
    "total_qubits_formula",
    "circuit_from_text",
    "data_cnot_depth",
    "ancilla_count",
]

SCHEDULE_VERSION = "1"

OPS = ("prepare_0", "prepare_plus", "hadamard", "cnot", "idle", "measure_z", "measure_x")
_PREPS = {"prepare_0": "X", "prepare_plus": "Z"}


class ScheduleConflict(ValueError):
    """Two instructions in one layer touch the same qubit."""


@dataclass(frozen=True)
class Instruction:
    """One gate.

    ``flip`` is only used by preparations: the Pauli applied by a faulty
    preparation.  By default it maps the prepared state to its orthogonal
    partner, but estimation circuits keep the fault of the instruction they
    replace.  ``meas`` is the measurement index for measurements.
    """

    op: str
    targets: tuple[int, ...]
    flip: str = ""
    meas: int = -1

    def __post_init__(self):
        if self.op not in OPS:
            raise ValueError(f"unknown instruction {self.op!r}")
        if self.op in _PREPS and not self.flip:
            object.__setattr__(self, "flip", _PREPS[self.op])


@dataclass(frozen=True)
class Layer:
    instructions: tuple[Instruction, ...]
    tag: str = ""

    def qubits(self) -> list[int]:
        return [q for ins in self.instructions for q in ins.targets]


@dataclass(frozen=True)
class MeasurementInfo:
    """What a measurement index means.

    ``kind`` is ``syndrome``, ``flag`` or ``final_data``; ``position`` is the flag
    slot inside its gadget (1..3) or the data-qubit index for final bits.
    """

    index: int
    kind: str
    face: int
    time: int
    basis: str
    qubit: int
    position: int = 0


@dataclass(frozen=True)
class GadgetSpec:
    """Static description of the gadget measuring one face.

    ``qubits`` lists the gadget qubits with the syndrome qubit first; for the
    four-qubit gadget the order is (syndrome, top flag, second, third).
    ``partition`` gives the data chunk handled by each gadget qubit and
    ``data_schedule`` the data-CNOT slot of every (gadget qubit, data) pair.
    """

    kind: str
    face: int
    qubits: tuple[int, ...]
    partition: tuple[tuple[int, ...], ...]
    data_schedule: tuple[tuple[int, int, int], ...]

    @property
    def syndrome_qubit(self) -> int:
        return self.qubits[0]

    @property
    def flag_qubits(self) -> tuple[int, ...]:
        return self.qubits[1:]

    @property
    def deflag_targets(self) -> tuple[int, ...]:
        """Data touched by the syndrome qubit, plus the top flag for four-qubit gadgets."""
        if self.kind == "two_qubit_flag":
            return tuple(sorted(self.partition[0]))
        if self.kind == "four_qubit_flag":
            return tuple(sorted(self.partition[0] + self.partition[1]))
        return ()


@dataclass(frozen=True)
class GadgetInstance:
    """One execution of a gadget inside a circuit."""

    face: int
    basis: str
    time: int
    kind: str
    syndrome_meas: int
    flag_meas: tuple[int, ...]
    deflag_targets: tuple[int, ...]
    deflag_layer: int


@dataclass(frozen=True)
class Circuit:
    """An immutable layered circuit with its measurement bookkeeping."""

    num_qubits: int
    roles: tuple[str, ...]
    layers: tuple[Layer, ...]
    measurements: tuple[MeasurementInfo, ...]
    gadgets: tuple[GadgetInstance, ...] = ()
    meta: dict = field(default_factory=dict)

    @property
    def num_measurements(self) -> int:
        return len(self.measurements)

    def qubits(self) -> list[tuple[int, str]]:
        return list(enumerate(self.roles))

    def select(self, kind: str, basis: str | None = None) -> list[MeasurementInfo]:
        return [m for m in self.measurements if m.kind == kind and (basis is None or m.basis == basis)]

    def cnot_layers(self, tag_prefix: str | None = None) -> int:
        return sum(1 for layer in self.layers
                   if any(i.op == "cnot" for i in layer.instructions)
                   and (tag_prefix is None or layer.tag.startswith(tag_prefix)))

    def check(self) -> None:
        """Raise ``ScheduleConflict`` if a layer touches some qubit twice."""
        for li, layer in enumerate(self.layers):
            qs = layer.qubits()
            if len(qs) != len(set(qs)):
                dup = sorted({q for q in qs if qs.count(q) > 1})
                raise ScheduleConflict(f"layer {li} ({layer.tag}) touches qubits {dup} more than once")
            if any(q < 0 or q >= self.num_qubits for q in qs):
                raise ScheduleConflict(f"layer {li} addresses a qubit outside the register")


def total_qubits_formula(family: Family | str, d: int, method: str) -> int:
    """Total qubit counts quoted for the single-ancilla and flagged layouts."""
    family = Family(family) if not isinstance(family, Family) else family
    if family is Family.C488:
        return (3 * d * d + 6 * d - 5) // 4 if method == "single_ancilla" else (5 * d * d + 4 * d - 5) // 4
    return (9 * d * d - 1) // 8 if method == "single_ancilla" else (3 * d * d - 1) // 2


# ---------------------------------------------------------------------------
# schedules


def _edge_coloring(edges: list[tuple[int, int]], k: int) -> list[int]:
    """Proper edge coloring of a bipartite multigraph-free graph with ``k`` colors.

    Classic alternating-path recoloring; succeeds whenever ``k`` is at least the
    maximum degree.  Left and right vertex labels must be disjoint integers.
    """
    at: dict[int, dict[int, int]] = {}  # vertex -> color -> edge index
    color = [-1] * len(edges)

    def free(v):
        used = at.setdefault(v, {})
        for c in range(k):
            if c not in used:
                return c
        raise ScheduleConflict(f"vertex {v} needs more than {k} colors")

    for e, (u, v) in enumerate(edges):
        a = free(u)
        b = free(v)
        if a not in at[v]:
            c = a
        else:
            # flip the a/b path starting at v so that a becomes free at v
            path = []
            x, want = v, a
            while want in at.setdefault(x, {}):
                pe = at[x][want]
                path.append(pe)
                pu, pv = edges[pe]
                x = pv if pu == x else pu
                want = b if want == a else a
            for pe in path:
                pu, pv = edges[pe]
                del at[pu][color[pe]]
                del at[pv][color[pe]]
            for pe in path:
                pu, pv = edges[pe]
                color[pe] = b if color[pe] == a else a
                at[pu][color[pe]] = pe
                at[pv][color[pe]] = pe
            c = a
        color[e] = c
        at[u][c] = e
        at[v][c] = e
    return color


def _direction_slot(code: ColorCode, face, q: int) -> int:
    cx, cy = face.center
    x, y = code.positions[q]
    ang = math.degrees(math.atan2(y - cy, x - cx)) % 360.0
    if code.family is Family.C666:
        return int(round(ang / 60.0)) % 6
    if face.kind == "square":
        # square vertices point along the axes: right, up, left, down
        return {0: 3, 1: 5, 2: 0, 3: 2}[int(round(ang / 90.0)) % 4]
    return int(math.floor(ang / 45.0)) % 8


def single_ancilla_schedule(code: ColorCode) -> dict[tuple[int, int], int]:
    """Time slot of every (face, data qubit) CNOT for the single-ancilla cycle."""
    depth = 8 if code.family is Family.C488 else 6
    slot: dict[tuple[int, int], int] = {}
    degree = code.check_matrix().sum(axis=0)
    for f in code.faces:
        for q in f.support:
            if degree[q] > 1:
                slot[(f.id, q)] = _direction_slot(code, f, q)
    for f in code.faces:
        used = {slot[(f.id, q)] for q in f.support if (f.id, q) in slot}
        for q in f.support:
            if (f.id, q) not in slot:
                want = _direction_slot(code, f, q)
                choices = sorted(set(range(depth)) - used, key=lambda s: ((s - want) % depth, s))
                slot[(f.id, q)] = choices[0]
                used.add(choices[0])
    _check_slots(code, slot)
    return slot


def _check_slots(code: ColorCode, slot: dict) -> None:
    by_face: dict[tuple[int, int], int] = {}
    by_qubit: dict[tuple[int, int], int] = {}
    for (f, q), s in slot.items():
        if (f, s) in by_face or (q, s) in by_qubit:
            raise ScheduleConflict(f"slot {s} reused at face {f} / qubit {q}")
        by_face[(f, s)] = q
        by_qubit[(q, s)] = f


def gadget_specs(code: ColorCode, method: str) -> list[GadgetSpec]:
    """Allocate ancillas and fix every face's internal schedule.

    Ancilla indices follow the data qubits, face by face.
    """
    specs: list[GadgetSpec] = []
    nxt = code.n
    if method == "single_ancilla":
        slot = single_ancilla_schedule(code)
        for f in code.faces:
            anc = nxt
            nxt += 1
            sched = tuple(sorted((slot[(f.id, q)], anc, q) for q in f.support))
            specs.append(GadgetSpec("single_ancilla", f.id, (anc,), (tuple(f.support),), sched))
        return specs
    if method != "flagged":
        raise ValueError(f"unknown method {method!r}")

    chunks_per_face = []
    for f in code.faces:
        w = f.weight
        if w in (4, 6):
            kind, parts = "two_qubit_flag", 2
        elif w == 8:
            kind, parts = "four_qubit_flag", 4
        else:
            raise ScheduleConflict(f"face {f.id} of weight {w} has no gadget")
        size = w // parts
        chunks = tuple(tuple(f.support[i * size:(i + 1) * size]) for i in range(parts))
        qubits = tuple(range(nxt, nxt + parts))
        nxt += parts
        chunks_per_face.append((f, kind, qubits, chunks))

    edges = []
    for f, kind, qubits, chunks in chunks_per_face:
        for g, chunk in zip(qubits, chunks):
            for q in chunk:
                edges.append((g, q))
    colors = _edge_coloring(edges, 3)
    slot = {e: c for e, c in zip(edges, colors)}
    for f, kind, qubits, chunks in chunks_per_face:
        sched = tuple(sorted((slot[(g, q)], g, q) for g, chunk in zip(qubits, chunks) for q in chunk))
        specs.append(GadgetSpec(kind, f.id, qubits, chunks, sched))
    return specs


# ---------------------------------------------------------------------------
# builder


class _Builder:
    def __init__(self, n_qubits: int, roles: list[str]):
        self.n = n_qubits
        self.roles = roles
        self.layers: list[Layer] = []
        self.meas: list[MeasurementInfo] = []
        self.gadgets: list[GadgetInstance] = []

    def layer(self, instructions: list[Instruction], tag: str) -> int:
        used = {q for ins in instructions for q in ins.targets}
        full = list(instructions) + [Instruction("idle", (q,)) for q in range(self.n) if q not in used]
        self.layers.append(Layer(tuple(full), tag))
        return len(self.layers) - 1

    def measure(self, op: str, q: int, kind: str, face: int, time: int, basis: str, position: int = 0) -> Instruction:
        idx = len(self.meas)
        self.meas.append(MeasurementInfo(idx, kind, face, time, basis, q, position))
        return Instruction(op, (q,), meas=idx)

    def build(self, meta: dict) -> Circuit:
        c = Circuit(self.n, tuple(self.roles), tuple(self.layers), tuple(self.meas), tuple(self.gadgets), dict(meta))
        c.check()
        return c


def _roles(code: ColorCode, specs: list[GadgetSpec]) -> list[str]:
    roles = ["data"] * code.n
    for s in specs:
        roles.append("syndrome")
        roles.extend(["flag"] * (len(s.qubits) - 1))
    return roles


def _cnot(basis: str, control: int, target: int) -> Instruction:
    # Z-type gadgets reverse every CNOT
    return Instruction("cnot", (control, target) if basis == "X" else (target, control))


def _emit_cycle(b: _Builder, code: ColorCode, specs: list[GadgetSpec], basis: str, time: int,
                trick: bool = False) -> None:
    """Append one half-cycle measuring every ``basis``-type stabilizer.

    With ``trick`` set, gadget qubits are prepared in the eigenstate that makes
    the gadget act trivially on the data (all |0> for X-type, all |+> for
    Z-type) while keeping the preparation and measurement faults of the
    original circuit; the syndrome qubit is then read in the basis in which its
    outcome is deterministic.
    """
    prep_main = "prepare_plus" if basis == "X" else "prepare_0"
    prep_flag = "prepare_0" if basis == "X" else "prepare_plus"
    meas_main = "measure_x" if basis == "X" else "measure_z"
    meas_flag = "measure_z" if basis == "X" else "measure_x"
    tag = f"t{time} {basis}"

    preps = []
    for s in specs:
        if trick:
            op = "prepare_0" if basis == "X" else "prepare_plus"
            preps.append(Instruction(op, (s.syndrome_qubit,), flip=_PREPS[prep_main]))
            preps.extend(Instruction(op, (q,), flip=_PREPS[prep_flag]) for q in s.flag_qubits)
        else:
            preps.append(Instruction(prep_main, (s.syndrome_qubit,)))
            preps.extend(Instruction(prep_flag, (q,)) for q in s.flag_qubits)
    b.layer(preps, f"{tag} prep")

    kinds = {s.kind for s in specs}
    has4 = "four_qubit_flag" in kinds
    flagged = kinds != {"single_ancilla"}

    if flagged:
        if has4:
            l1 = [_cnot(basis, s.qubits[0], s.qubits[2]) for s in specs if s.kind == "four_qubit_flag"]
            b.layer(l1, f"{tag} cat1")
        l2 = []
        for s in specs:
            if s.kind == "two_qubit_flag":
                l2.append(_cnot(basis, s.qubits[0], s.qubits[1]))
            else:
                sy, top, mid, low = s.qubits
                l2 += [_cnot(basis, sy, top), _cnot(basis, mid, low)]
        b.layer(l2, f"{tag} cat2")

    depth = 1 + max(t for s in specs for t, _, _ in s.data_schedule)
    if not flagged:
        depth = 8 if code.family is Family.C488 else 6
    for slot in range(depth):
        ins = [_cnot(basis, g, q) for s in specs for (t, g, q) in s.data_schedule if t == slot]
        b.layer(ins, f"{tag} data{slot + 1}")

    if flagged:
        u1 = []
        for s in specs:
            if s.kind == "two_qubit_flag":
                u1.append(_cnot(basis, s.qubits[0], s.qubits[1]))
            else:
                sy, top, mid, low = s.qubits
                u1 += [_cnot(basis, sy, mid), _cnot(basis, low, top)]
        b.layer(u1, f"{tag} uncat1")
        if has4:
            u2 = [_cnot(basis, s.qubits[0], s.qubits[3]) for s in specs if s.kind == "four_qubit_flag"]
            b.layer(u2, f"{tag} uncat2")

    meas = []
    pending = []
    for s in specs:
        op = meas_main
        if trick:
            op = "measure_z" if basis == "X" else "measure_x"
        ins = b.measure(op, s.syndrome_qubit, "syndrome", s.face, time, basis)
        meas.append(ins)
        flags = []
        for pos, q in enumerate(s.flag_qubits, start=1):
            fi = b.measure(meas_flag, q, "flag", s.face, time, basis, pos)
            meas.append(fi)
            flags.append(fi.meas)
        pending.append((s, ins.meas, tuple(flags)))
    li = b.layer(meas, f"{tag} measure")
    for s, sm, fm in pending:
        if s.kind != "single_ancilla":
            b.gadgets.append(GadgetInstance(s.face, basis, time, s.kind, sm, fm, s.deflag_targets, li))


def _cycle_fragment(code: ColorCode, basis: str, method: str) -> Circuit:
    specs = gadget_specs(code, method)
    n = code.n + sum(len(s.qubits) for s in specs)
    b = _Builder(n, _roles(code, specs))
    _emit_cycle(b, code, specs, basis, 1)
    return b.build({"family": code.family.value, "d": code.distance, "method": method,
                    "kind": "cycle", "basis": basis, "schedule_version": SCHEDULE_VERSION})


def build_single_ancilla_cycle(code: ColorCode, basis: str) -> Circuit:
    """One half-cycle measuring all ``basis`` stabilizers with one ancilla per face."""
    return _cycle_fragment(code, basis.upper(), "single_ancilla")


def build_flagged_cycle(code: ColorCode, basis: str) -> Circuit:
    """One half-cycle measuring all ``basis`` stabilizers with flag gadgets."""
    return _cycle_fragment(code, basis.upper(), "flagged")


def build_memory_experiment(code: ColorCode, method: str, decode_basis: str, rounds: int | None = None) -> Circuit:
    """Memory experiment: data preparation, ``rounds`` X-then-Z cycles, transversal readout.

    ``decode_basis`` names the error type being decoded: ``"X"`` prepares
    |0...0> and reads out in Z, ``"Z"`` prepares |+...+> and reads out in X.
    """
    decode_basis = decode_basis.upper()
    rounds = code.distance if rounds is None else int(rounds)
    specs = gadget_specs(code, method)
    n = code.n + sum(len(s.qubits) for s in specs)
    b = _Builder(n, _roles(code, specs))
    prep = "prepare_0" if decode_basis == "X" else "prepare_plus"
    b.layer([Instruction(prep, (q,)) for q in range(code.n)], "data prep")
    for t in range(1, rounds + 1):
        _emit_cycle(b, code, specs, "X", t)
        _emit_cycle(b, code, specs, "Z", t)
    _final_readout(b, code, decode_basis, rounds + 1)
    return b.build({"family": code.family.value, "d": code.distance, "method": method, "kind": "memory",
                    "decode_basis": decode_basis, "rounds": rounds, "schedule_version": SCHEDULE_VERSION})


def _final_readout(b: _Builder, code: ColorCode, decode_basis: str, time: int) -> None:
    op = "measure_z" if decode_basis == "X" else "measure_x"
    rb = "Z" if decode_basis == "X" else "X"
    b.layer([b.measure(op, q, "final_data", -1, time, rb, q) for q in range(code.n)], "data readout")


def build_estimation_circuit(code: ColorCode, side: str) -> Circuit:
    """Circuit used to learn flag-conditioned error statistics.

    ``CX`` runs an X half-cycle whose ancillas start in |0>, then an ordinary Z
    half-cycle, then reads every data qubit in Z.  ``CZ`` is the mirror image.
    Only the flagged method is supported.
    """
    side = side.upper()
    if side not in ("CX", "CZ"):
        raise ValueError("side must be 'CX' or 'CZ'")
    specs = gadget_specs(code, "flagged")
    n = code.n + sum(len(s.qubits) for s in specs)
    b = _Builder(n, _roles(code, specs))
    first, second, decode_basis = ("X", "Z", "X") if side == "CX" else ("Z", "X", "Z")
    prep = "prepare_0" if side == "CX" else "prepare_plus"
    b.layer([Instruction(prep, (q,)) for q in range(code.n)], "data prep")
    _emit_cycle(b, code, specs, first, 1, trick=True)
    _emit_cycle(b, code, specs, second, 1)
    _final_readout(b, code, decode_basis, 2)
    return b.build({"family": code.family.value, "d": code.distance, "method": "flagged", "kind": "estimation",
                    "side": side, "decode_basis": decode_basis, "schedule_version": SCHEDULE_VERSION})


# ---------------------------------------------------------------------------
# text format


def circuit_to_text(circuit: Circuit) -> str:
    """Line-based dump: header, qubit roles, one block per layer, then the measurement map."""
    meta = " ".join(f"{k}={v}" for k, v in sorted(circuit.meta.items()))
    out = [f"CIRCUIT {meta}"]
    for q, role in enumerate(circuit.roles):
        out.append(f"QUBIT {q} {role}")
    for li, layer in enumerate(circuit.layers):
        out.append(f"LAYER {li} {layer.tag}")
        for ins in layer.instructions:
            extra = ""
            if ins.op in _PREPS:
                extra = f" flip={ins.flip}"
            elif ins.meas >= 0:
                extra = f" m={ins.meas}"
            out.append(f"  {ins.op} {' '.join(map(str, ins.targets))}{extra}")
    for m in circuit.measurements:
        out.append(f"MEAS {m.index} {m.kind} face={m.face} time={m.time} basis={m.basis} "
                   f"qubit={m.qubit} pos={m.position}")
    for g in circuit.gadgets:
        out.append(f"GADGET face={g.face} basis={g.basis} time={g.time} kind={g.kind} "
                   f"syndrome={g.syndrome_meas} flags={','.join(map(str, g.flag_meas))} "
                   f"deflag={','.join(map(str, g.deflag_targets))} layer={g.deflag_layer}")
    return "\n".join(out) + "\n"


def circuit_from_text(text: str) -> Circuit:
    """Parse the format written by :func:`circuit_to_text`."""
    roles: list[str] = []
    layers: list[Layer] = []
    meas: list[MeasurementInfo] = []
    gadgets: list[GadgetInstance] = []
    meta: dict = {}
    cur: list[Instruction] | None = None
    tag = ""

    def close():
        if cur is not None:
            layers.append(Layer(tuple(cur), tag))

    def kv(tokens):
        return dict(t.split("=", 1) for t in tokens)

    for line in text.splitlines():
        if not line.strip():
            continue
        if line.startswith("  "):
            parts = line.split()
            op, rest = parts[0], parts[1:]
            targets = tuple(int(t) for t in rest if "=" not in t)
            opts = kv([t for t in rest if "=" in t])
            cur.append(Instruction(op, targets, flip=opts.get("flip", ""), meas=int(opts.get("m", -1))))
            continue
        head, *rest = line.split()
        if head == "CIRCUIT":
            meta = kv(rest)
        elif head == "QUBIT":
            roles.append(rest[1])
        elif head == "LAYER":
            close()
            cur = []
            tag = " ".join(rest[1:])
        elif head == "MEAS":
            close()
            cur = None
            o = kv(rest[2:])
            meas.append(MeasurementInfo(int(rest[0]), rest[1], int(o["face"]), int(o["time"]), o["basis"],
                                        int(o["qubit"]), int(o["pos"])))
        elif head == "GADGET":
            o = kv(rest)
            split = lambda s: tuple(int(x) for x in s.split(",") if x)
            gadgets.append(GadgetInstance(int(o["face"]), o["basis"], int(o["time"]), o["kind"],
                                          int(o["syndrome"]), split(o["flags"]), split(o["deflag"]),
                                          int(o["layer"])))
    close()
    for k, v in list(meta.items()):
        if v.lstrip("-").isdigit():
            meta[k] = int(v)
    c = Circuit(len(roles), tuple(roles), tuple(layers), tuple(meas), tuple(gadgets), meta)
    c.check()
    return c


def data_cnot_depth(circuit: Circuit) -> int:
    """Largest number of data-interaction time steps inside one half-cycle.

    Scheduled steps are counted even when, for a small patch, no face uses one
    of them; such a step is kept as a layer of idles.
    """
    counts: dict[str, int] = {}
    for layer in circuit.layers:
        if " data" in layer.tag:
            key = layer.tag.split(" data")[0]
            counts[key] = counts.get(key, 0) + 1
    return max(counts.values()) if counts else 0


def ancilla_count(circuit: Circuit) -> int:
    return sum(1 for r in circuit.roles if r != "data")


def role_array(circuit: Circuit) -> np.ndarray:
    return np.array(circuit.roles)
