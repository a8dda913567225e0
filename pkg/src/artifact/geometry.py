"""Triangular (4.8.8) and (6.6.6) color codes.

Each face of a color code carries one X-type and one Z-type stabilizer with the
same support, so a single face-by-qubit incidence matrix describes both.

The (4.8.8) patch is built on the dual lattice: octagon centers sit on integer
points ``(a, b)`` (red when ``a + b`` is even, green otherwise) and squares on
half-integer points (blue).  A data qubit is a vertex of the truncated-square
tiling, i.e. a triangle made of two axis-adjacent octagon sites and one square
site, and it is kept when at least two of those three faces belong to the
patch.  Every odd-weight face then receives one private corner qubit.  The face
set is a staircase of full octagons, a staircase of squares, one diagonal row of
truncated octagons and two alternating rows along the legs.

The (6.6.6) patch uses the usual sheared triangular layout of hexagon centers.
"""

from __future__ import annotations

import enum
import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import gf2

__all__ = [
    "Family",
    "Face",
    "ColorCode",
    "SearchBudgetExceeded",
    "build_color_code",
    "validate_code",
    "min_logical_weight",
    "code_to_json",
    "expected_data_qubits",
    "expected_faces",
    "steane_equivalent",
]

COLORS = ("R", "G", "B")
_KIND_WEIGHTS = {"square": 4, "trapezoid": 4, "hexagon": 6, "octagon": 8}


class Family(str, enum.Enum):
    """Lattice family of a triangular color code."""

    C488 = "C488"
    C666 = "C666"

    @classmethod
    def parse(cls, value: "str | Family") -> "Family":
        if isinstance(value, Family):
            return value
        key = str(value).upper().replace(".", "").replace("(", "").replace(")", "")
        if not key.startswith("C"):
            key = "C" + key
        return cls(key)


class SearchBudgetExceeded(RuntimeError):
    """Raised when an exhaustive search would exceed its configured budget."""


@dataclass(frozen=True)
class Face:
    """One plaquette; ``support`` lists data qubits in cyclic order around the face."""

    id: int
    color: str
    support: tuple[int, ...]
    kind: str
    center: tuple[float, float]

    @property
    def weight(self) -> int:
        return len(self.support)


@dataclass(frozen=True)
class ColorCode:
    """Immutable description of a triangular color code."""

    family: Family
    distance: int
    positions: np.ndarray = field(repr=False)
    faces: tuple[Face, ...] = field(repr=False)
    logical_x: tuple[int, ...] = ()
    logical_z: tuple[int, ...] = ()

    @property
    def n(self) -> int:
        return len(self.positions)

    @property
    def data_qubits(self) -> range:
        return range(self.n)

    @property
    def num_faces(self) -> int:
        return len(self.faces)

    def check_matrix(self) -> np.ndarray:
        """Face-by-qubit incidence matrix over GF(2)."""
        h = np.zeros((self.num_faces, self.n), dtype=np.uint8)
        for f in self.faces:
            h[f.id, list(f.support)] = 1
        return h

    def faces_of_qubit(self, q: int) -> tuple[int, ...]:
        return tuple(f.id for f in self.faces if q in f.support)

    def logical_vector(self, kind: str) -> np.ndarray:
        v = np.zeros(self.n, dtype=np.uint8)
        v[list(self.logical_x if kind.upper() == "X" else self.logical_z)] = 1
        return v


def expected_data_qubits(family: Family | str, d: int) -> int:
    family = Family.parse(family)
    return (d * d + 2 * d - 1) // 2 if family is Family.C488 else (3 * d * d + 1) // 4


def expected_faces(family: Family | str, d: int) -> int:
    family = Family.parse(family)
    return (d * d + 2 * d - 3) // 4 if family is Family.C488 else (3 * d * d - 3) // 8


# ---------------------------------------------------------------------------
# construction


def build_color_code(family: Family | str, distance: int) -> ColorCode:
    """Build the triangular color code of the given family and odd distance.

    Parameters
    ----------
    family : Family or str
        ``"C488"`` or ``"C666"``.
    distance : int
        Odd code distance, at least 3.

    Returns
    -------
    ColorCode
        Qubits are indexed row-major (by rounded ``y`` then ``x``) and faces
        likewise by their centers, so identical inputs give identical codes.
    """
    family = Family.parse(family)
    if not isinstance(distance, (int, np.integer)) or distance < 3 or distance % 2 == 0:
        raise ValueError(f"distance must be an odd integer >= 3, got {distance!r}")
    d = int(distance)
    if family is Family.C488:
        pos, raw_faces = _layout_488(d)
    else:
        pos, raw_faces = _layout_666(d)
    return _assemble(family, d, pos, raw_faces)


def _assemble(family, d, pos, raw_faces) -> ColorCode:
    # raw_faces: list of (color, kind, center, set of raw qubit ids)
    order = sorted(range(len(pos)), key=lambda i: (round(pos[i][1], 6), round(pos[i][0], 6)))
    relabel = {old: new for new, old in enumerate(order)}
    positions = np.array([pos[i] for i in order], dtype=float)

    raw_faces = sorted(raw_faces, key=lambda f: (round(f[2][1], 6), round(f[2][0], 6)))
    faces = []
    for fid, (color, kind, center, qubits) in enumerate(raw_faces):
        qs = [relabel[q] for q in qubits]
        cx, cy = center
        ang = {q: math.atan2(positions[q][1] - cy, positions[q][0] - cx) for q in qs}
        cyc = sorted(qs, key=lambda q: ang[q])
        # start the cycle at the lowest index for a canonical form
        k = cyc.index(min(cyc))
        cyc = cyc[k:] + cyc[:k]
        faces.append(Face(fid, color, tuple(cyc), kind, (float(cx), float(cy))))

    # logical operators: qubits untouched by faces of one color form a boundary
    boundary = [q for q in range(len(positions)) if not any(f.color == "R" and q in f.support for f in faces)]
    logical = tuple(sorted(boundary))
    return ColorCode(family, d, positions, tuple(faces), logical, logical)


def _layout_488(d: int):
    half = Fraction(1, 2)
    k = (d - 3) // 2
    octs = [(a, b) for a in range(k + 1) for b in range(k + 1) if a + b <= k]
    octs += [(-1, b) for b in range(k + 1) if b % 2 == k % 2]
    octs += [(a, -1) for a in range(k + 1) if a % 2 != k % 2]
    squares = [(a + half, b + half) for a in range(-1, k) for b in range(-1, k) if a + b <= k - 2]
    present = set(octs) | set(squares)

    # truncated-square tiling with unit octagon spacing: squares have side
    # 1/(1+sqrt2) and their vertices sit e/sqrt2 from the center
    offset = (1.0 / (1.0 + math.sqrt(2.0))) / math.sqrt(2.0)
    qubits: list[tuple] = []
    pos: list[tuple[float, float]] = []
    lo, hi = -2, k + 2
    for a in range(lo, hi + 1):
        for b in range(lo, hi + 1):
            for da, db in ((1, 0), (0, 1)):
                o1, o2 = (a, b), (a + da, b + db)
                if da:
                    sqs = [(a + half, b + half), (a + half, b - half)]
                else:
                    sqs = [(a + half, b + half), (a - half, b + half)]
                for s in sqs:
                    tri = (o1, o2, s)
                    if sum(t in present for t in tri) < 2:
                        continue
                    mx, my = (o1[0] + o2[0]) / 2, (o1[1] + o2[1]) / 2
                    sx, sy = float(s[0]), float(s[1])
                    vx, vy = mx - sx, my - sy
                    nrm = math.hypot(vx, vy)
                    qubits.append(tri)
                    pos.append((sx + offset * vx / nrm, sy + offset * vy / nrm))

    members = {f: [i for i, t in enumerate(qubits) if f in t] for f in present}
    # circumradius of a regular octagon with the same edge length
    r_oct = (1.0 / (1.0 + math.sqrt(2.0))) / (2.0 * math.sin(math.pi / 8))
    raw_faces = []
    for f in sorted(present, key=lambda t: (float(t[1]), float(t[0]))):
        cx, cy = float(f[0]), float(f[1])
        qs = members[f]
        if len(qs) % 2:
            # private corner qubit placed in the widest angular gap of the face
            angs = sorted(math.atan2(pos[q][1] - cy, pos[q][0] - cx) for q in qs)
            gaps = [(angs[(i + 1) % len(angs)] - angs[i]) % (2 * math.pi) for i in range(len(angs))]
            i = int(np.argmax(gaps))
            mid = angs[i] + gaps[i] / 2
            pos.append((cx + r_oct * math.cos(mid), cy + r_oct * math.sin(mid)))
            qubits.append(("corner", f))
            qs = qs + [len(pos) - 1]
        if isinstance(f[0], Fraction):
            color, kind = "B", "square"
        else:
            color = "R" if (f[0] + f[1]) % 2 == 0 else "G"
            kind = "octagon" if len(qs) == 8 else "trapezoid"
        raw_faces.append((color, kind, (cx, cy), set(qs)))
    return pos, raw_faces


def _layout_666(d: int):
    size = 3 * (d - 1) // 2
    pos: list[tuple[float, float]] = []
    index: dict[tuple[int, int], int] = {}
    centers = []
    for y in range(size + 1):
        color, anc = {0: ("G", 2), 1: ("B", 0), 2: ("R", 1)}[y % 3]
        for x in range(y, 2 * size - y + 1, 2):
            if round((x - y) / 2) % 3 == anc:
                centers.append((x, y, color))
            else:
                index[(x, y)] = len(pos)
                pos.append((float(x), float(y)))
    raw_faces = []
    for x, y, color in centers:
        nbrs = [(x + 2, y), (x - 2, y), (x + 1, y + 1), (x - 1, y + 1), (x + 1, y - 1), (x - 1, y - 1)]
        qs = {index[p] for p in nbrs if p in index}
        kind = "hexagon" if len(qs) == 6 else "trapezoid"
        raw_faces.append((color, kind, (float(x), float(y)), qs))
    # scale to unit hexagon spacing for plotting
    pos = [(x / 2.0, y * math.sqrt(3.0) / 2.0) for x, y in pos]
    raw_faces = [(c, k, (cx / 2.0, cy * math.sqrt(3.0) / 2.0), qs) for c, k, (cx, cy), qs in raw_faces]
    return pos, raw_faces


# ---------------------------------------------------------------------------
# validation


def validate_code(code: ColorCode) -> list[str]:
    """Check the structural invariants of a color code.

    Returns
    -------
    list of str
        One human-readable message per violated invariant; empty when valid.
    """
    problems: list[str] = []
    allowed = {4, 8} if code.family is Family.C488 else {4, 6}
    h = code.check_matrix()

    for f in code.faces:
        if f.weight not in allowed or f.weight % 2:
            problems.append(f"weight: face {f.id} has weight {f.weight}, allowed {sorted(allowed)}")
        if _KIND_WEIGHTS.get(f.kind) != f.weight:
            problems.append(f"kind: face {f.id} of kind {f.kind} has weight {f.weight}")
        if f.color not in COLORS:
            problems.append(f"color: face {f.id} has unknown color {f.color!r}")
        if len(set(f.support)) != f.weight:
            problems.append(f"support: face {f.id} repeats a qubit")

    overlap = h.astype(np.int64) @ h.T.astype(np.int64)
    for i, j in zip(*np.nonzero(np.triu(overlap % 2, 1))):
        problems.append(f"commutation: faces {i} and {j} share {overlap[i, j]} qubits")
    for i, j in zip(*np.nonzero(np.triu(overlap >= 2, 1))):
        if code.faces[i].color == code.faces[j].color:
            problems.append(f"coloring: adjacent faces {i} and {j} are both {code.faces[i].color}")

    degree = h.sum(axis=0)
    for q in np.nonzero(degree > 3)[0]:
        problems.append(f"degree: qubit {q} lies in {degree[q]} faces")
    for q in np.nonzero(degree == 0)[0]:
        problems.append(f"degree: qubit {q} lies in no face")

    n_exp = expected_data_qubits(code.family, code.distance)
    if code.n != n_exp:
        problems.append(f"count: {code.n} data qubits, expected {n_exp}")
    f_exp = expected_faces(code.family, code.distance)
    if code.num_faces != f_exp:
        problems.append(f"count: {code.num_faces} faces, expected {f_exp}")

    lx, lz = code.logical_vector("X"), code.logical_vector("Z")
    if ((h.astype(np.int64) @ lx) % 2).any():
        problems.append("logical: logical X anticommutes with a Z stabilizer")
    if ((h.astype(np.int64) @ lz) % 2).any():
        problems.append("logical: logical Z anticommutes with an X stabilizer")
    if int(lx.astype(np.int64) @ lz) % 2 != 1:
        problems.append("logical: logical X and logical Z commute")
    return problems


def min_logical_weight(code: ColorCode, pauli_type: str = "X", max_kernel_dim: int = 22,
                       time_limit: float = 120.0) -> int:
    """Minimum weight of a nontrivial logical operator of the given Pauli type.

    The candidates commute with every stabilizer of the opposite type and
    anticommute with the opposite logical.  Small kernels are enumerated
    exhaustively; larger ones fall back to an integer program.

    Raises
    ------
    SearchBudgetExceeded
        If the integer program does not prove optimality within ``time_limit``.
    """
    h = code.check_matrix()
    partner = code.logical_vector("Z" if pauli_type.upper() == "X" else "X")
    kernel = gf2.nullspace(h)
    dim = kernel.shape[0]
    if dim <= max_kernel_dim:
        best = code.n + 1
        chunk = 1 << min(dim, 16)
        kp = kernel.astype(np.int64)
        parity = (kp @ partner.astype(np.int64)) % 2
        for start in range(0, 1 << dim, chunk):
            idx = np.arange(start, min(start + chunk, 1 << dim), dtype=np.int64)
            bits = ((idx[:, None] >> np.arange(dim)) & 1)
            odd = (bits @ parity) % 2 == 1
            if not odd.any():
                continue
            vecs = (bits[odd] @ kp) % 2
            best = min(best, int(vecs.sum(axis=1).min()))
        return best
    return _min_logical_milp(h, partner, time_limit)


def _min_logical_milp(h: np.ndarray, partner: np.ndarray, time_limit: float) -> int:
    from scipy.optimize import Bounds, LinearConstraint, milp

    m, n = h.shape
    # x (n binaries), slack per stabilizer row, one slack for the logical row
    nv = n + m + 1
    a = np.zeros((m + 1, nv))
    a[:m, :n] = h
    a[:m, n:n + m] = -2 * np.eye(m)
    a[m, :n] = partner
    a[m, n + m] = -2
    lo = np.zeros(m + 1)
    lo[m] = 1
    cost = np.zeros(nv)
    cost[:n] = 1
    ub = np.concatenate([np.ones(n), np.full(m, 4), [n]])
    res = milp(cost, constraints=LinearConstraint(a, lo, lo), integrality=np.ones(nv),
               bounds=Bounds(0, ub), options={"time_limit": time_limit})
    if res.status != 0:
        raise SearchBudgetExceeded(f"logical weight search stopped: {res.message}")
    return int(round(res.fun))


# ---------------------------------------------------------------------------
# export


def code_to_json(code: ColorCode) -> str:
    """Serialize a code to a JSON document (vertices, faces and logicals)."""
    doc = {
        "family": code.family.value,
        "distance": code.distance,
        "vertices": [{"id": i, "x": round(float(x), 6), "y": round(float(y), 6)}
                     for i, (x, y) in enumerate(code.positions)],
        "faces": [{"id": f.id, "color": f.color, "kind": f.kind, "support": list(f.support),
                   "center": [round(f.center[0], 6), round(f.center[1], 6)]} for f in code.faces],
        "logical_x": list(code.logical_x),
        "logical_z": list(code.logical_z),
    }
    return json.dumps(doc, indent=1)


def steane_equivalent(code: ColorCode) -> bool:
    """True when the code's stabilizer group equals the Steane code's up to relabeling."""
    if code.n != 7 or code.num_faces != 3:
        return False
    # Hamming [7,4] parity checks, as a row space, match up to column permutation
    ref = np.array([[1, 0, 1, 0, 1, 0, 1], [0, 1, 1, 0, 0, 1, 1], [0, 0, 0, 1, 1, 1, 1]], dtype=np.uint8)
    h = code.check_matrix()
    target = {tuple(r) for r in _span(ref)}
    for perm in itertools.permutations(range(7)):
        if {tuple(r) for r in _span(h[:, perm])} == target:
            return True
    return False


def _span(rows: np.ndarray) -> np.ndarray:
    k = rows.shape[0]
    combos = ((np.arange(1 << k)[:, None] >> np.arange(k)) & 1).astype(np.int64)
    return (combos @ rows.astype(np.int64)) % 2
