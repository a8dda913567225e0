"""Exact minimum-weight decoding as a binary integer program.

Variables are the data errors ``x_v^(t)`` (``t = 1..T+1``) and measurement
errors ``r_f^(t)`` (``t = 1..T``).  Every face and round contributes one parity
constraint

    XOR_{v in f} x_v^(t)  XOR  r_f^(t)  XOR  r_f^(t-1)  =  delta_f^(t),

with ``r^(0) = r^(T+1) = 0``.  Each XOR becomes a linear equality with one
integer slack (``sum - 2 k = delta``) and the program minimizes
``sum w_v^(t) x_v^(t) + sum w_f^(t) r_f^(t)``.  The MIP itself is handed to
HiGHS with zero optimality gap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import highspy
import numpy as np
from scipy import sparse

from .circuit import Circuit
from .geometry import ColorCode

__all__ = [
    "DecodingInstance",
    "DecodingSolution",
    "IlpDecoder",
    "detectors_from_bits",
    "final_data_bits",
    "parity_matrix",
    "build_instance",
    "decode",
    "brute_force_decode",
    "judge_logical_error",
    "instance_to_text",
    "instance_from_text",
]


@dataclass
class DecodingInstance:
    """One decoding problem.

    ``detectors[t - 1, f]`` is ``delta_f^(t)`` for ``t = 1..T+1``; the last row is
    the ideal round computed from the transversal data readout.
    """

    h: np.ndarray
    detectors: np.ndarray
    w_data: np.ndarray
    w_meas: np.ndarray
    basis: str = "X"

    @property
    def rounds(self) -> int:
        return self.detectors.shape[0] - 1

    @property
    def num_binaries(self) -> int:
        return self.w_data.size + self.w_meas.size

    def check(self) -> None:
        nf, n = self.h.shape
        T = self.rounds
        if self.detectors.shape != (T + 1, nf) or self.w_data.shape != (T + 1, n) or self.w_meas.shape != (T, nf):
            raise ValueError("instance arrays do not match the code and round count")

    def weight_vector(self) -> np.ndarray:
        return np.concatenate([self.w_data.ravel(), self.w_meas.ravel()])

    def objective(self, x: np.ndarray, r: np.ndarray) -> float:
        return float((self.w_data * x).sum() + (self.w_meas * r).sum())

    def satisfied(self, x: np.ndarray, r: np.ndarray) -> bool:
        return bool((_syndrome_of(self.h, x, r) == self.detectors).all())


@dataclass
class DecodingSolution:
    x: np.ndarray
    r: np.ndarray
    objective: float
    status: str  # optimal | budget_exceeded | infeasible
    info: dict = field(default_factory=dict)

    @property
    def correction(self) -> np.ndarray:
        """Cumulative inferred data error."""
        return (self.x.sum(axis=0) & 1).astype(np.uint8)


def _syndrome_of(h: np.ndarray, x: np.ndarray, r: np.ndarray) -> np.ndarray:
    out = (x.astype(np.int64) @ h.T.astype(np.int64)) & 1
    rr = np.vstack([r, np.zeros((1, r.shape[1]), dtype=r.dtype)]).astype(np.int64)
    prev = np.vstack([np.zeros((1, r.shape[1]), dtype=np.int64), r.astype(np.int64)])
    return ((out + rr + prev) & 1).astype(np.uint8)


def parity_matrix(h: np.ndarray, rounds: int) -> sparse.csr_matrix:
    """Constraint matrix over (x, r) with one row per (round, face)."""
    nf, n = h.shape
    T = rounds
    nx = (T + 1) * n
    rows, cols = [], []
    for t in range(T + 1):
        for f in range(nf):
            row = t * nf + f
            for v in np.nonzero(h[f])[0]:
                rows.append(row)
                cols.append(t * n + v)
            if t < T:
                rows.append(row)
                cols.append(nx + t * nf + f)
            if t > 0:
                rows.append(row)
                cols.append(nx + (t - 1) * nf + f)
    shape = ((T + 1) * nf, nx + T * nf)
    return sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=shape)


# ---------------------------------------------------------------------------
# instances from shots


def detectors_from_bits(code: ColorCode, circuit: Circuit, bits: np.ndarray, basis: str) -> np.ndarray:
    """Detector arrays (shots, T+1, F) for decoding ``basis`` errors.

    X errors are seen by Z syndromes and Z errors by X syndromes; the final
    layer is the face parity of the transversal readout.  ``s^(0)`` is zero.
    """
    bits = np.atleast_2d(bits).astype(np.int64)
    basis = basis.upper()
    synd_basis = "Z" if basis == "X" else "X"
    T = int(circuit.meta.get("rounds", code.distance))
    nf = code.num_faces
    idx = np.full((T, nf), -1, dtype=np.int64)
    for m in circuit.measurements:
        if m.kind == "syndrome" and m.basis == synd_basis:
            idx[m.time - 1, m.face] = m.index
    final = [m.index for m in sorted(circuit.select("final_data"), key=lambda m: m.position)]
    s = np.zeros((bits.shape[0], T + 2, nf), dtype=np.int64)
    s[:, 1:T + 1, :] = bits[:, idx]
    s[:, T + 1, :] = (bits[:, final] @ code.check_matrix().T.astype(np.int64)) & 1
    return (s[:, 1:, :] ^ s[:, :-1, :]).astype(np.uint8)


def final_data_bits(circuit: Circuit, bits: np.ndarray) -> np.ndarray:
    final = [m.index for m in sorted(circuit.select("final_data"), key=lambda m: m.position)]
    return np.atleast_2d(bits)[:, final].astype(np.uint8)


def build_instance(code: ColorCode, circuit: Circuit, bits: np.ndarray, weights, basis: str) -> DecodingInstance:
    """Decoding instance of one shot (``bits`` already deflagged if enabled)."""
    if weights.basis.upper() != basis.upper():
        raise ValueError("weights were built for the other basis")
    bits = np.asarray(bits)
    if bits.shape[-1] != circuit.num_measurements:
        raise ValueError("shot does not match the circuit")
    det = detectors_from_bits(code, circuit, bits, basis)[0]
    inst = DecodingInstance(code.check_matrix(), det, np.asarray(weights.data, float),
                            np.asarray(weights.meas, float), basis.upper())
    inst.check()
    return inst


# ---------------------------------------------------------------------------
# solvers


class IlpDecoder:
    """Reusable HiGHS model for a fixed code and number of rounds.

    Only costs and right-hand sides change between shots.  Solutions of
    repeated identical instances are memoized.
    """

    def __init__(self, h: np.ndarray, rounds: int, node_limit: int = 10_000_000,
                 time_limit: float | None = None, cache_size: int = 200_000):
        self.h = np.asarray(h, dtype=np.uint8)
        self.rounds = int(rounds)
        nf, n = self.h.shape
        self.nx = (self.rounds + 1) * n
        self.nr = self.rounds * nf
        self.nb = self.nx + self.nr
        self.nrows = (self.rounds + 1) * nf
        a = parity_matrix(self.h, self.rounds).tolil()
        deg = np.asarray(a.sum(axis=1)).ravel()
        slack = sparse.identity(self.nrows, format="lil") * -2.0
        full = sparse.hstack([a, slack]).tocsc()
        self._full = full
        self._slack_ub = np.floor(deg / 2.0)
        self.node_limit = int(node_limit)
        self.time_limit = time_limit
        self._cache: dict = {}
        self._cache_size = cache_size
        self.stats = {"solved": 0, "trivial": 0, "cached": 0, "budget_exceeded": 0}
        self._h = None

    def _model(self) -> highspy.Highs:
        if self._h is not None:
            return self._h
        hs = highspy.Highs()
        hs.setOptionValue("output_flag", False)
        hs.setOptionValue("threads", 1)
        hs.setOptionValue("mip_rel_gap", 0.0)
        hs.setOptionValue("mip_abs_gap", 1e-9)
        hs.setOptionValue("mip_max_nodes", self.node_limit)
        hs.setOptionValue("random_seed", 0)
        if self.time_limit is not None:
            hs.setOptionValue("time_limit", float(self.time_limit))
        ncol = self.nb + self.nrows
        lp = highspy.HighsLp()
        lp.num_col_ = ncol
        lp.num_row_ = self.nrows
        lp.col_cost_ = np.zeros(ncol)
        lp.col_lower_ = np.zeros(ncol)
        lp.col_upper_ = np.concatenate([np.ones(self.nb), self._slack_ub])
        lp.row_lower_ = np.zeros(self.nrows)
        lp.row_upper_ = np.zeros(self.nrows)
        m = self._full
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = m.indptr.astype(np.int32)
        lp.a_matrix_.index_ = m.indices.astype(np.int32)
        lp.a_matrix_.value_ = m.data.astype(float)
        lp.integrality_ = [highspy.HighsVarType.kInteger] * ncol
        hs.passModel(lp)
        self._h = hs
        return hs

    def decode(self, inst: DecodingInstance) -> DecodingSolution:
        nf, n = self.h.shape
        T = self.rounds
        w = inst.weight_vector()
        det = inst.detectors.ravel().astype(np.int64)
        if not det.any() and (w >= 0).all():
            self.stats["trivial"] += 1
            return DecodingSolution(np.zeros((T + 1, n), np.uint8), np.zeros((T, nf), np.uint8), 0.0, "optimal")
        key = (det.tobytes(), w.tobytes())
        hit = self._cache.get(key)
        if hit is not None:
            self.stats["cached"] += 1
            x, r, obj, status = hit
            return DecodingSolution(x.copy(), r.copy(), obj, status)

        hs = self._model()
        hs.clearSolver()
        idx = np.arange(self.nb, dtype=np.int32)
        hs.changeColsCost(self.nb, idx, w.astype(float))
        ridx = np.arange(self.nrows, dtype=np.int32)
        rhs = det.astype(float)
        hs.changeRowsBounds(self.nrows, ridx, rhs, rhs)
        hs.run()
        status = hs.getModelStatus()
        sol = hs.getSolution()
        if status == highspy.HighsModelStatus.kOptimal:
            label = "optimal"
        elif sol.value_valid:
            label = "budget_exceeded"
            self.stats["budget_exceeded"] += 1
        else:
            # cannot happen for a parity system with free r variables; be explicit anyway
            raise RuntimeError(f"solver returned {hs.modelStatusToString(status)} without a solution")
        vals = np.rint(np.asarray(sol.col_value[: self.nb])).astype(np.uint8)
        x = vals[: self.nx].reshape(T + 1, n)
        r = vals[self.nx:].reshape(T, nf)
        obj = inst.objective(x, r)
        self.stats["solved"] += 1
        if len(self._cache) < self._cache_size:
            self._cache[key] = (x.copy(), r.copy(), obj, label)
        return DecodingSolution(x, r, obj, label)


def decode(inst: DecodingInstance, budget: int = 10_000_000) -> DecodingSolution:
    """Solve one instance exactly (convenience wrapper around :class:`IlpDecoder`)."""
    inst.check()
    return IlpDecoder(inst.h, inst.rounds, node_limit=budget).decode(inst)


def brute_force_decode(inst: DecodingInstance, max_binaries: int = 24) -> DecodingSolution:
    """Exhaustive minimum over all assignments; the reference oracle for small instances."""
    nb = inst.num_binaries
    if nb > max_binaries:
        raise ValueError(f"{nb} binaries exceed the exhaustive limit {max_binaries}")
    T = inst.rounds
    nf, n = inst.h.shape
    a = parity_matrix(inst.h, T).toarray().astype(np.int64)
    target = inst.detectors.ravel().astype(np.int64)
    w = inst.weight_vector()
    best, best_vec = np.inf, None
    chunk = 1 << min(nb, 16)
    for start in range(0, 1 << nb, chunk):
        ids = np.arange(start, min(start + chunk, 1 << nb), dtype=np.int64)
        assign = (ids[:, None] >> np.arange(nb)) & 1
        ok = (((assign @ a.T) & 1) == target).all(axis=1)
        if not ok.any():
            continue
        cand = assign[ok]
        cost = cand @ w
        i = int(np.argmin(cost))
        if cost[i] < best:
            best, best_vec = float(cost[i]), cand[i]
    x = best_vec[: (T + 1) * n].reshape(T + 1, n).astype(np.uint8)
    r = best_vec[(T + 1) * n:].reshape(T, nf).astype(np.uint8)
    return DecodingSolution(x, r, best, "optimal")


def judge_logical_error(solution: DecodingSolution, final_bits: np.ndarray, code: ColorCode, basis: str) -> int:
    """1 if the residual data error after correction flips the logical observable."""
    residual = (np.asarray(final_bits, dtype=np.uint8) ^ solution.correction).astype(np.int64)
    logical = code.logical_vector("Z" if basis.upper() == "X" else "X").astype(np.int64)
    return int(residual @ logical) & 1


# ---------------------------------------------------------------------------
# text format


def instance_to_text(inst: DecodingInstance) -> str:
    """Plain-text dump: variables with weights, then one parity row per line."""
    nf, n = inst.h.shape
    T = inst.rounds
    out = [f"INSTANCE basis={inst.basis} rounds={T} faces={nf} qubits={n}"]
    k = 0
    for t in range(T + 1):
        for v in range(n):
            out.append(f"VAR {k} x t={t + 1} id={v} w={float(inst.w_data[t, v])!r}")
            k += 1
    for t in range(T):
        for f in range(nf):
            out.append(f"VAR {k} r t={t + 1} id={f} w={float(inst.w_meas[t, f])!r}")
            k += 1
    a = parity_matrix(inst.h, T).tocsr()
    for row in range(a.shape[0]):
        t, f = divmod(row, nf)
        cols = a.indices[a.indptr[row]:a.indptr[row + 1]]
        out.append(f"ROW {row} face={f} t={t + 1} rhs={int(inst.detectors[t, f])} "
                   f"vars={','.join(map(str, sorted(cols)))}")
    for f in range(nf):
        out.append(f"FACE {f} {' '.join(map(str, np.nonzero(inst.h[f])[0]))}")
    return "\n".join(out) + "\n"


def instance_from_text(text: str) -> DecodingInstance:
    lines = text.splitlines()
    head = dict(tok.split("=") for tok in lines[0].split()[1:])
    T, nf, n = int(head["rounds"]), int(head["faces"]), int(head["qubits"])
    wd = np.zeros((T + 1, n))
    wm = np.zeros((T, nf))
    det = np.zeros((T + 1, nf), dtype=np.uint8)
    h = np.zeros((nf, n), dtype=np.uint8)
    for line in lines[1:]:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "VAR":
            kv = dict(p.split("=") for p in parts[3:])
            target = wd if parts[2] == "x" else wm
            target[int(kv["t"]) - 1, int(kv["id"])] = float(kv["w"])
        elif parts[0] == "ROW":
            kv = dict(p.split("=") for p in parts[2:])
            det[int(kv["t"]) - 1, int(kv["face"])] = int(kv["rhs"])
        elif parts[0] == "FACE":
            h[int(parts[1]), [int(q) for q in parts[2:]]] = 1
    return DecodingInstance(h, det, wd, wm, head["basis"])
