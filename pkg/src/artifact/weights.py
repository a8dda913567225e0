"""Flag-conditioned error statistics and decoder weights.

Error statistics are learned from the estimation circuits: after a run (with
deflagging when requested) the final data bits are the data errors, the face
parities of those bits are the ideal syndrome, and any disagreement with the
measured syndrome of the second half-cycle is a measurement error.  Counts are
kept per flag pattern.

Pattern keys concatenate flag bits face by face (ascending face id) and, inside
a face, by flag position; bit ``i`` of the integer key is the ``i``-th flag in
that order.

For a memory experiment with rounds ``t = 1..T`` and a final ideal round
``T + 1`` the weights are:

* X errors (Z syndromes): ``w_v^(t)`` uses the X-gadget flags of round ``t`` on
  the faces around ``v``; ``w_f^(t)`` the Z-gadget flags of face ``f`` in round
  ``t``; ``w_v^(T+1)`` is unconditioned.
* Z errors (X syndromes): ``w_v^(1)`` is unconditioned and ``w_v^(t)`` uses the
  Z-gadget flags of round ``t - 1``; ``w_f^(t)`` the X-gadget flags of round ``t``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .circuit import SCHEDULE_VERSION, Circuit, build_estimation_circuit
from .deflag import Deflagger
from .geometry import ColorCode
from .noise import FrameSampler, NoiseModel

__all__ = [
    "TABLE_VERSION",
    "MIN_PATTERN_COUNT",
    "logit_weight",
    "ConditionalProbTable",
    "WeightAssignment",
    "WeightBuilder",
    "estimate_conditional_probs",
    "build_weights",
]

TABLE_VERSION = "1"
MIN_PATTERN_COUNT = 100


def logit_weight(q):
    """Decoder weight ``-ln(q / (1 - q))`` of an event with probability ``q``.

    Raises
    ------
    ValueError
        If ``q`` is not strictly between 0 and 1; smooth first.
    """
    arr = np.asarray(q, dtype=float)
    if np.any((arr <= 0.0) | (arr >= 1.0)):
        raise ValueError("probability must lie strictly between 0 and 1")
    out = -np.log(arr / (1.0 - arr))
    return float(out) if out.ndim == 0 else out


def _flag_layout(code: ColorCode, circuit: Circuit, basis: str, time: int):
    """Flag measurement indices per face for ``basis`` gadgets at ``time``."""
    per_face: dict[int, list[int]] = {f.id: [] for f in code.faces}
    for m in circuit.measurements:
        if m.kind == "flag" and m.basis == basis and m.time == time:
            per_face[m.face].append((m.position, m.index))
    return {f: [i for _, i in sorted(v)] for f, v in per_face.items()}


def _pattern_sources(code: ColorCode, layout: dict[int, list[int]]):
    """Measurement indices forming each data qubit's pattern key."""
    return [[i for f in sorted(code.faces_of_qubit(v)) for i in layout[f]] for v in range(code.n)]


def _keys(bits: np.ndarray, idx: list[int]) -> np.ndarray:
    if not idx:
        return np.zeros(bits.shape[0], dtype=np.int64)
    sub = bits[:, idx].astype(np.int64)
    return (sub << np.arange(len(idx), dtype=np.int64)).sum(axis=1)


@dataclass
class ConditionalProbTable:
    """Counts of errors per location and flag pattern.

    ``data_counts[v]`` and ``data_errors[v]`` are arrays indexed by the integer
    pattern key of qubit ``v``; ``meas_counts[f]`` and ``meas_errors[f]`` the same
    for the measurement error of face ``f``.
    """

    family: str
    d: int
    p: float
    basis: str
    deflag: bool
    samples: int
    data_width: list[int]
    meas_width: list[int]
    data_counts: list[np.ndarray]
    data_errors: list[np.ndarray]
    meas_counts: list[np.ndarray]
    meas_errors: list[np.ndarray]
    seed: int | None = None
    schedule_version: str = SCHEDULE_VERSION
    version: str = TABLE_VERSION
    min_count: int = MIN_PATTERN_COUNT

    @classmethod
    def empty(cls, code: ColorCode, p: float, basis: str, deflag: bool, data_width, meas_width, seed=None):
        return cls(code.family.value, code.distance, float(p), basis, bool(deflag), 0,
                   list(data_width), list(meas_width),
                   [np.zeros(1 << w, dtype=np.int64) for w in data_width],
                   [np.zeros(1 << w, dtype=np.int64) for w in data_width],
                   [np.zeros(1 << w, dtype=np.int64) for w in meas_width],
                   [np.zeros(1 << w, dtype=np.int64) for w in meas_width], seed)

    def merge(self, other: "ConditionalProbTable") -> "ConditionalProbTable":
        """Associative merge of two shards estimated for the same setting."""
        if (self.family, self.d, self.basis, self.deflag, self.data_width, self.meas_width) != \
                (other.family, other.d, other.basis, other.deflag, other.data_width, other.meas_width):
            raise ValueError("cannot merge tables of different settings")
        add = lambda a, b: [x + y for x, y in zip(a, b)]
        return ConditionalProbTable(self.family, self.d, self.p, self.basis, self.deflag,
                                    self.samples + other.samples, self.data_width, self.meas_width,
                                    add(self.data_counts, other.data_counts), add(self.data_errors, other.data_errors),
                                    add(self.meas_counts, other.meas_counts), add(self.meas_errors, other.meas_errors),
                                    self.seed, self.schedule_version, self.version, self.min_count)

    # -- estimates ---------------------------------------------------------
    @staticmethod
    def _raw(counts, errors):
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(counts > 0, errors / np.maximum(counts, 1), np.nan)

    def raw_data(self, v: int) -> np.ndarray:
        """Unsmoothed ``p(x_v = 1 | pattern)``; NaN for unseen patterns."""
        return self._raw(self.data_counts[v], self.data_errors[v])

    def raw_meas(self, f: int) -> np.ndarray:
        return self._raw(self.meas_counts[f], self.meas_errors[f])

    def _smoothed(self, counts, errors):
        n, k = counts.sum(), errors.sum()
        base = (k + 1.0) / (n + 2.0)
        cond = (errors + 1.0) / (counts + 2.0)
        return np.where(counts >= self.min_count, cond, base), base

    def data_prob(self, v: int) -> np.ndarray:
        """Smoothed conditional probability per pattern key, with low-count fallback."""
        return self._smoothed(self.data_counts[v], self.data_errors[v])[0]

    def meas_prob(self, f: int) -> np.ndarray:
        return self._smoothed(self.meas_counts[f], self.meas_errors[f])[0]

    def data_marginal(self, v: int) -> float:
        return float(self._smoothed(self.data_counts[v], self.data_errors[v])[1])

    def meas_marginal(self, f: int) -> float:
        return float(self._smoothed(self.meas_counts[f], self.meas_errors[f])[1])

    # -- persistence -------------------------------------------------------
    def to_json(self) -> str:
        entries = []
        for kind, counts, errors, widths in (("data", self.data_counts, self.data_errors, self.data_width),
                                             ("measurement", self.meas_counts, self.meas_errors, self.meas_width)):
            for loc, (c, e, w) in enumerate(zip(counts, errors, widths)):
                for key in np.nonzero(c)[0]:
                    bits = format(int(key), f"0{w}b")[::-1] if w else ""
                    entries.append({"location": kind, "id": loc, "pattern": bits,
                                    "count": int(c[key]), "errors": int(e[key])})
        doc = {
            "version": self.version,
            "family": self.family,
            "d": self.d,
            "p": self.p,
            "samples": self.samples,
            "deflag": self.deflag,
            "schedule_version": self.schedule_version,
            "decode_basis": self.basis,
            "seed": self.seed,
            "min_count": self.min_count,
            "data_width": self.data_width,
            "measurement_width": self.meas_width,
            "entries": entries,
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "ConditionalProbTable":
        doc = json.loads(text)
        if str(doc.get("version")) != TABLE_VERSION:
            raise ValueError(f"unsupported table version {doc.get('version')!r}")
        dw, mw = doc["data_width"], doc["measurement_width"]
        t = cls(doc["family"], int(doc["d"]), float(doc["p"]), doc["decode_basis"], bool(doc["deflag"]),
                int(doc["samples"]), dw, mw,
                [np.zeros(1 << w, dtype=np.int64) for w in dw], [np.zeros(1 << w, dtype=np.int64) for w in dw],
                [np.zeros(1 << w, dtype=np.int64) for w in mw], [np.zeros(1 << w, dtype=np.int64) for w in mw],
                doc.get("seed"), str(doc["schedule_version"]), str(doc["version"]), int(doc.get("min_count", MIN_PATTERN_COUNT)))
        for e in doc["entries"]:
            key = int(e["pattern"][::-1], 2) if e["pattern"] else 0
            if e["location"] == "data":
                t.data_counts[e["id"]][key] = e["count"]
                t.data_errors[e["id"]][key] = e["errors"]
            else:
                t.meas_counts[e["id"]][key] = e["count"]
                t.meas_errors[e["id"]][key] = e["errors"]
        return t

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "ConditionalProbTable":
        with open(path) as fh:
            return cls.from_json(fh.read())


def estimate_conditional_probs(code: ColorCode, side: str, noise: NoiseModel, num_samples: int, seed: int,
                               deflag: bool = True, chunk: int = 65536) -> ConditionalProbTable:
    """Learn flag-conditioned data and measurement error rates from ``CX`` or ``CZ``.

    Parameters
    ----------
    side : {"CX", "CZ"}
        ``CX`` gives the table for decoding X errors, ``CZ`` for Z errors.
    deflag : bool
        Apply deflag updates before reading the errors, matching the setting
        used later when decoding.
    """
    if num_samples <= 0:
        raise ValueError("num_samples must be positive")
    side = side.upper()
    circuit = build_estimation_circuit(code, side)
    first, second = ("X", "Z") if side == "CX" else ("Z", "X")
    sampler = FrameSampler(circuit, noise)
    dfl = Deflagger(circuit, sampler.model) if deflag else None

    data_src = _pattern_sources(code, _flag_layout(code, circuit, first, 1))
    meas_layout = _flag_layout(code, circuit, second, 1)
    meas_src = [meas_layout[f.id] for f in code.faces]
    synd = {m.face: m.index for m in circuit.measurements if m.kind == "syndrome" and m.basis == second}
    synd_idx = [synd[f.id] for f in code.faces]
    final_idx = [m.index for m in sorted(circuit.select("final_data"), key=lambda m: m.position)]
    h = code.check_matrix().astype(np.int64)

    table = ConditionalProbTable.empty(code, noise.p, "X" if side == "CX" else "Z", deflag,
                                       [len(s) for s in data_src], [len(s) for s in meas_src], seed)
    block = 1024
    chunk = max(block, (chunk // block) * block)
    for start in range(0, num_samples, chunk):
        n = min(chunk, num_samples - start)
        batch = sampler.sample(n, seed, start=start, gauge=False, block=block)
        if dfl is not None:
            batch = dfl.apply(batch)
        bits = batch.bits
        data_err = bits[:, final_idx].astype(np.int64)
        ideal = (data_err @ h.T) & 1
        meas_err = ideal ^ bits[:, synd_idx].astype(np.int64)
        for v, src in enumerate(data_src):
            keys = _keys(bits, src)
            size = 1 << len(src)
            table.data_counts[v] += np.bincount(keys, minlength=size)
            table.data_errors[v] += np.bincount(keys, weights=data_err[:, v], minlength=size).astype(np.int64)
        for f, src in enumerate(meas_src):
            keys = _keys(bits, src)
            size = 1 << len(src)
            table.meas_counts[f] += np.bincount(keys, minlength=size)
            table.meas_errors[f] += np.bincount(keys, weights=meas_err[:, f], minlength=size).astype(np.int64)
        table.samples += n
    return table


@dataclass
class WeightAssignment:
    """Weights of one decoding problem.

    ``data[t - 1, v]`` is ``w_v^(t)`` for ``t = 1..T+1`` and ``meas[t - 1, f]`` is
    ``w_f^(t)`` for ``t = 1..T``.
    """

    data: np.ndarray
    meas: np.ndarray
    scheme: str = "uniform"
    basis: str = "X"


class WeightBuilder:
    """Turns flag records of a memory experiment into per-shot weights.

    Lookup tables are built once so that weights for a batch of shots reduce to
    integer indexing.
    """

    def __init__(self, code: ColorCode, circuit: Circuit, scheme: str, basis: str,
                 table: ConditionalProbTable | None = None):
        scheme = scheme.lower()
        basis = basis.upper()
        if scheme not in ("uniform", "conventional", "flagged"):
            raise ValueError(f"unknown weight scheme {scheme!r}")
        if scheme != "uniform":
            if table is None:
                raise ValueError(f"scheme {scheme!r} needs a conditional probability table")
            if table.basis != basis:
                raise ValueError("table was estimated for the other decoding basis")
            if (table.family, table.d) != (code.family.value, code.distance):
                raise ValueError("table was estimated for a different code")
        if scheme == "flagged" and not circuit.gadgets:
            raise ValueError("flagged weights need a flagged circuit")
        self.code = code
        self.scheme = scheme
        self.basis = basis
        self.table = table
        self.rounds = int(circuit.meta.get("rounds", code.distance))
        n, nf, T = code.n, code.num_faces, self.rounds
        if scheme == "uniform":
            self._data_const = np.ones((T + 1, n))
            self._meas_const = np.ones((T, nf))
            return
        self._data_lut = [logit_weight(table.data_prob(v)) for v in range(n)]
        self._meas_lut = [logit_weight(table.meas_prob(f)) for f in range(nf)]
        self._data_marg = np.array([logit_weight(table.data_marginal(v)) for v in range(n)])
        self._meas_marg = np.array([logit_weight(table.meas_marginal(f)) for f in range(nf)])
        if scheme == "conventional":
            self._data_const = np.tile(self._data_marg, (T + 1, 1))
            self._meas_const = np.tile(self._meas_marg, (T, 1))
            return
        data_gadget, meas_gadget = ("X", "Z") if basis == "X" else ("Z", "X")
        # sources[t][v]: flag measurement indices for w_v^(t+1); None = unconditioned
        self._data_src: list[list[list[int]] | None] = []
        for t in range(1, T + 2):
            src_time = t if basis == "X" else t - 1
            if basis == "X" and t == T + 1 or basis == "Z" and t == 1:
                self._data_src.append(None)
            else:
                self._data_src.append(_pattern_sources(code, _flag_layout(code, circuit, data_gadget, src_time)))
        self._meas_src = []
        for t in range(1, T + 1):
            lay = _flag_layout(code, circuit, meas_gadget, t)
            self._meas_src.append([lay[f.id] for f in code.faces])
        for srcs in self._data_src:
            if srcs is not None and [len(s) for s in srcs] != table.data_width:
                raise ValueError("table pattern widths do not match the circuit")

    def batch(self, bits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Weights for every shot: arrays (shots, T+1, n) and (shots, T, F)."""
        bits = np.atleast_2d(bits)
        s = bits.shape[0]
        if self.scheme != "flagged":
            return (np.broadcast_to(self._data_const, (s,) + self._data_const.shape),
                    np.broadcast_to(self._meas_const, (s,) + self._meas_const.shape))
        T, n, nf = self.rounds, self.code.n, self.code.num_faces
        wd = np.empty((s, T + 1, n))
        wm = np.empty((s, T, nf))
        for ti, srcs in enumerate(self._data_src):
            if srcs is None:
                wd[:, ti, :] = self._data_marg
                continue
            for v in range(n):
                wd[:, ti, v] = self._data_lut[v][_keys(bits, srcs[v])]
        for ti, srcs in enumerate(self._meas_src):
            for f in range(nf):
                wm[:, ti, f] = self._meas_lut[f][_keys(bits, srcs[f])]
        return wd, wm

    def single(self, bits: np.ndarray) -> WeightAssignment:
        wd, wm = self.batch(np.asarray(bits)[None, :])
        return WeightAssignment(np.array(wd[0]), np.array(wm[0]), self.scheme, self.basis)


def build_weights(code: ColorCode, circuit: Circuit, scheme: str, basis: str, bits: np.ndarray | None = None,
                  table: ConditionalProbTable | None = None) -> WeightAssignment:
    """Weights for one shot of ``circuit`` (``bits`` may be omitted for flag-free schemes)."""
    builder = WeightBuilder(code, circuit, scheme, basis, table)
    if bits is None:
        bits = np.zeros(circuit.num_measurements, dtype=bool)
    return builder.single(bits)
