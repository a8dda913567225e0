"""End-to-end memory experiments: sampling, deflagging, weighting, decoding, reporting.

Each configuration point ``(family, d, p, method, scheme, deflag, basis)`` is run
in shards of shots.  Shards are slices of one counter-based random stream, so
the failure count of a point does not depend on the shard size, the number of
workers or the order in which shards finish.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .circuit import SCHEDULE_VERSION, build_memory_experiment
from .decoder import IlpDecoder, DecodingInstance, detectors_from_bits, final_data_bits, judge_logical_error
from .deflag import Deflagger
from .fitting import FitResult, crossing_points, fit_threshold, wilson_interval
from .geometry import build_color_code
from .noise import FrameSampler, NoiseModel
from .weights import ConditionalProbTable, WeightBuilder, estimate_conditional_probs

__all__ = [
    "Variant", "ExperimentConfig", "ResultRow", "MissingTableError", "table_filename", "load_or_estimate_table",
    "run_point", "run_experiment", "fit_results", "write_fit_csv", "emit_outputs", "read_results_csv",
    "RESULT_COLUMNS", "FIT_COLUMNS",
]

log = logging.getLogger(__name__)

RESULT_COLUMNS = ["family", "d", "p", "method", "scheme", "deflag", "basis", "shots", "failures", "rate",
                  "ci_lo", "ci_hi", "seed", "schedule_version", "table_version", "budget_exceeded"]
FIT_COLUMNS = ["family", "method", "scheme", "deflag", "basis", "c", "c_err", "p_th", "p_th_err", "alpha",
               "alpha_err", "window_lo", "window_hi", "points", "identifiable", "note"]

_BLOCK = 1024


class MissingTableError(FileNotFoundError):
    """A non-uniform weight scheme was requested without a probability table."""


@dataclass(frozen=True)
class Variant:
    method: str = "flagged"
    scheme: str = "flagged"
    deflag: bool = True

    def check(self) -> None:
        if self.method not in ("single_ancilla", "flagged"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.scheme not in ("uniform", "conventional", "flagged"):
            raise ValueError(f"unknown weight scheme {self.scheme!r}")
        if self.method == "single_ancilla" and (self.scheme != "uniform" or self.deflag):
            raise ValueError("single_ancilla supports only uniform weights without deflagging")


@dataclass
class ExperimentConfig:
    """Declarative description of a batch of memory experiments.

    ``variants`` lists the (method, scheme, deflag) combinations to run; when
    empty the top-level ``method``/``scheme``/``deflag`` fields define a single
    variant.  ``table_path`` is a directory holding probability tables named by
    :func:`table_filename`.
    """

    family: str = "C488"
    distances: list[int] = field(default_factory=lambda: [3, 5])
    p_grid: list[float] = field(default_factory=lambda: [5e-4, 1e-3, 2e-3])
    method: str = "flagged"
    scheme: str = "flagged"
    deflag: bool = True
    variants: list[Variant] = field(default_factory=list)
    shots: int = 100_000
    seed: int = 0
    bases: list[str] = field(default_factory=lambda: ["Z"])
    table_path: str | None = None
    output_path: str = "results.csv"
    estimate_missing: bool = False
    estimation_samples: int = 1_000_000
    node_limit: int = 10_000_000
    strict: bool = True
    workers: int = 1
    shard: int = 8192
    fit_window: tuple[float, float] | None = None
    plots: bool = True

    def __post_init__(self):
        self.variants = [v if isinstance(v, Variant) else Variant(**v) for v in self.variants]
        self.distances = [int(d) for d in self.distances]
        self.p_grid = [float(p) for p in self.p_grid]
        self.bases = [b.upper() for b in self.bases]
        if self.fit_window is not None:
            self.fit_window = (float(self.fit_window[0]), float(self.fit_window[1]))

    def all_variants(self) -> list[Variant]:
        return list(self.variants) or [Variant(self.method, self.scheme, bool(self.deflag))]

    def check(self) -> None:
        if not self.distances or any(d < 3 or d % 2 == 0 for d in self.distances):
            raise ValueError("distances must be odd and at least 3")
        if not self.p_grid or any(not 0 <= p < 1 for p in self.p_grid):
            raise ValueError("physical error rates must lie in [0, 1)")
        if self.shots < 1:
            raise ValueError("shots must be at least 1")
        if any(b not in ("X", "Z") for b in self.bases):
            raise ValueError("bases must be X or Z")
        if self.shard < _BLOCK or self.shard % _BLOCK:
            raise ValueError(f"shard must be a positive multiple of {_BLOCK}")
        for v in self.all_variants():
            v.check()

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["variants"] = [asdict(v) for v in self.variants]
        return out


@dataclass
class ResultRow:
    family: str
    d: int
    p: float
    method: str
    scheme: str
    deflag: bool
    basis: str
    shots: int
    failures: int
    seed: int
    schedule_version: str
    table_version: str
    budget_exceeded: int = 0

    @property
    def rate(self) -> float:
        return self.failures / self.shots if self.shots else 0.0

    @property
    def interval(self) -> tuple[float, float]:
        return wilson_interval(self.failures, self.shots)

    def series(self) -> tuple:
        return (self.family, self.method, self.scheme, self.deflag, self.basis)


# ---------------------------------------------------------------------------
# probability tables


def table_filename(family: str, d: int, p: float, basis: str, deflag: bool) -> str:
    tag = "deflag" if deflag else "nodeflag"
    return f"table_{family}_d{d}_p{p:g}_{basis}_{tag}.json"


def _table_version(table: ConditionalProbTable | None) -> str:
    if table is None:
        return "none"
    digest = hashlib.sha256(table.to_json().encode()).hexdigest()[:12]
    return f"{table.version}-{digest}"


def load_or_estimate_table(family: str, d: int, p: float, basis: str, deflag: bool, table_path: str | None,
                           estimate_missing: bool, samples: int, seed: int) -> ConditionalProbTable:
    """Read a table from ``table_path`` or, if allowed, estimate and store it there."""
    path = Path(table_path) / table_filename(family, d, p, basis, deflag) if table_path else None
    if path is not None and path.exists():
        table = ConditionalProbTable.load(path)
        if (table.family, table.d, table.basis, table.deflag) != (family, d, basis, deflag):
            raise ValueError(f"{path} does not match the requested configuration")
        if not np.isclose(table.p, p, rtol=1e-12, atol=0.0):
            log.warning("table %s was estimated at p=%g, used at p=%g", path, table.p, p)
        return table
    if not estimate_missing:
        where = path if path is not None else "(no table_path configured)"
        raise MissingTableError(f"no probability table for {family} d={d} p={p:g} basis={basis}: {where}")
    code = build_color_code(family, d)
    side = "CX" if basis == "X" else "CZ"
    log.info("estimating %s table for %s d=%d p=%g (%d samples)", side, family, d, p, samples)
    table = estimate_conditional_probs(code, side, NoiseModel(p), samples, seed, deflag=deflag)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        table.save(path)
    return table


# ---------------------------------------------------------------------------
# shot execution


@dataclass(frozen=True)
class _Point:
    family: str
    d: int
    p: float
    method: str
    scheme: str
    deflag: bool
    basis: str
    seed: int
    node_limit: int
    strict: bool


class _Context:
    """Everything needed to sample and decode shots of one configuration point."""

    def __init__(self, point: _Point, table_json: str | None):
        code = build_color_code(point.family, point.d)
        circuit = build_memory_experiment(code, point.method, point.basis)
        self.point = point
        self.code = code
        self.circuit = circuit
        self.sampler = FrameSampler(circuit, NoiseModel(point.p))
        self.deflagger = Deflagger(circuit, self.sampler.model) if point.deflag else None
        table = ConditionalProbTable.from_json(table_json) if table_json else None
        self.weights = WeightBuilder(code, circuit, point.scheme, point.basis, table)
        self.decoder = IlpDecoder(code.check_matrix(), circuit.meta["rounds"], node_limit=point.node_limit)

    def run(self, start: int, count: int) -> tuple[int, int]:
        """Failures and budget-exceeded decodes among shots ``start .. start+count-1``."""
        pt = self.point
        batch = self.sampler.sample(count, pt.seed, start=start, block=_BLOCK)
        if self.deflagger is not None:
            batch = self.deflagger.apply(batch)
        bits = batch.bits
        wd, wm = self.weights.batch(bits)
        det = detectors_from_bits(self.code, self.circuit, bits, pt.basis)
        fin = final_data_bits(self.circuit, bits)
        failures = budget = 0
        for s in range(count):
            sol = self.decoder.decode(DecodingInstance(self.decoder.h, det[s], wd[s], wm[s], pt.basis))
            if sol.status != "optimal":
                budget += 1
                if pt.strict:
                    failures += 1
                    continue
            failures += judge_logical_error(sol, fin[s], self.code, pt.basis)
        return failures, budget


_CONTEXTS: dict = {}


def _shard_job(args) -> tuple[int, int, int]:
    point, table_json, start, count = args
    key = (point, table_json)
    ctx = _CONTEXTS.get(key)
    if ctx is None:
        _CONTEXTS.clear()
        ctx = _CONTEXTS[key] = _Context(point, table_json)
    f, b = ctx.run(start, count)
    return count, f, b


def run_point(family: str, d: int, p: float, variant: Variant, basis: str, shots: int, seed: int,
              table: ConditionalProbTable | None = None, node_limit: int = 10_000_000, strict: bool = True,
              shard: int = 8192, workers: int = 1) -> ResultRow:
    """Run ``shots`` memory experiments of one configuration and count logical failures."""
    variant.check()
    if variant.scheme != "uniform" and table is None:
        raise MissingTableError(f"scheme {variant.scheme!r} needs a probability table")
    basis = basis.upper()
    point = _Point(family, int(d), float(p), variant.method, variant.scheme, bool(variant.deflag), basis,
                   int(seed), int(node_limit), bool(strict))
    table_json = table.to_json() if (table is not None and variant.scheme != "uniform") else None
    jobs = [(point, table_json, s, min(shard, shots - s)) for s in range(0, shots, shard)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_shard_job, jobs))
    else:
        parts = [_shard_job(j) for j in jobs]
    # (shots, failures, budget) is a commutative monoid under addition
    total, failures, budget = (int(x) for x in np.sum(np.array(parts, dtype=np.int64), axis=0))
    if budget:
        log.warning("%s d=%d p=%g %s: %d of %d shots exceeded the decode budget", family, d, p, basis, budget, total)
    return ResultRow(family, int(d), float(p), variant.method, variant.scheme, bool(variant.deflag), basis, total,
                     failures, int(seed), SCHEDULE_VERSION,
                     _table_version(table if variant.scheme != "uniform" else None), budget)


def run_experiment(config: ExperimentConfig) -> list[ResultRow]:
    """Run every configuration point of ``config``; rows follow the config's nesting order."""
    config.check()
    rows = []
    for variant in config.all_variants():
        for basis in config.bases:
            for d in config.distances:
                for p in config.p_grid:
                    table = None
                    if variant.scheme != "uniform":
                        table = load_or_estimate_table(config.family, d, p, basis, variant.deflag,
                                                       config.table_path, config.estimate_missing,
                                                       config.estimation_samples, config.seed)
                    row = run_point(config.family, d, p, variant, basis, config.shots, config.seed, table,
                                    config.node_limit, config.strict, config.shard, config.workers)
                    log.info("%s d=%d p=%g %s/%s/%s %s: %d/%d", row.family, d, p, variant.method, variant.scheme,
                             "deflag" if variant.deflag else "nodeflag", basis, row.failures, row.shots)
                    rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# fitting and output


def fit_results(rows: list[ResultRow], window: tuple[float, float] | None = None) -> dict[tuple, FitResult]:
    """Scaling-law fit per series; series without enough usable data are skipped."""
    groups: dict[tuple, list[ResultRow]] = {}
    for r in rows:
        groups.setdefault(r.series(), []).append(r)
    fits = {}
    for key, grp in groups.items():
        pts = [(r.p, r.d, r.rate) for r in grp]
        try:
            fits[key] = fit_threshold(pts, window)
        except ValueError as exc:
            log.info("no fit for %s: %s", key, exc)
            continue
        by_d: dict[int, list] = {}
        for r in sorted(grp, key=lambda r: r.p):
            by_d.setdefault(r.d, []).append((r.p, r.rate))
        crossing_points(by_d)
    return fits


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".10g")
    return str(x)


def _series_name(key: tuple) -> str:
    family, method, scheme, deflag, basis = key
    return f"{family}_{method}_{scheme}_{'deflag' if deflag else 'nodeflag'}_{basis}"


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    path.write_text(buf.getvalue())


def write_fit_csv(fits: dict[tuple, FitResult], path) -> Path:
    """One row per series with ``c``, ``p_th`` and ``alpha`` and their standard errors."""
    rows = []
    for key, f in sorted(fits.items(), key=lambda kv: _series_name(kv[0])):
        rows.append(list(key) + [f.c, f.c_err, f.p_th, f.p_th_err, f.alpha, f.alpha_err, f.window[0],
                                 f.window[1], f.points_used, f.identifiable, f.note])
    path = Path(path)
    _write_csv(path, FIT_COLUMNS, rows)
    return path


def emit_outputs(results: list[ResultRow], fits: dict[tuple, FitResult] | None, path,
                 plots: bool = True) -> list[Path]:
    """Write the results CSV, the fit CSV (if any fits) and per-distance plot data.

    Companion files share the stem of ``path``: ``<stem>_fit.csv``,
    ``<stem>_plot_<series>_d<d>.csv`` and, with ``plots``, ``<stem>_<series>.png``.
    """
    if not results:
        raise ValueError("no results to write")
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    if not os.access(path.parent, os.W_OK):
        raise PermissionError(f"cannot write to {path.parent}")
    written = []
    table = []
    for r in results:
        lo, hi = r.interval
        table.append([r.family, r.d, r.p, r.method, r.scheme, r.deflag, r.basis, r.shots, r.failures, r.rate,
                      lo, hi, r.seed, r.schedule_version, r.table_version, r.budget_exceeded])
    _write_csv(path, RESULT_COLUMNS, table)
    written.append(path)

    if fits:
        written.append(write_fit_csv(fits, path.with_name(path.stem + "_fit.csv")))

    series: dict[tuple, dict[int, list[ResultRow]]] = {}
    for r in results:
        series.setdefault(r.series(), {}).setdefault(r.d, []).append(r)
    for key, by_d in sorted(series.items(), key=lambda kv: _series_name(kv[0])):
        name = _series_name(key)
        for d, rs in sorted(by_d.items()):
            ppath = path.with_name(f"{path.stem}_plot_{name}_d{d}.csv")
            _write_csv(ppath, ["p", "rate", "ci_lo", "ci_hi", "shots", "failures"],
                       [[r.p, r.rate, *r.interval, r.shots, r.failures] for r in sorted(rs, key=lambda r: r.p)])
            written.append(ppath)
        if plots:
            written.append(_plot_series(path.with_name(f"{path.stem}_{name}.png"), name, by_d,
                                        (fits or {}).get(key)))
    return written


def _plot_series(path: Path, title: str, by_d: dict[int, list[ResultRow]], fit: FitResult | None) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 4))
    for d, rs in sorted(by_d.items()):
        rs = sorted(rs, key=lambda r: r.p)
        ps = np.array([r.p for r in rs])
        rates = np.array([r.rate for r in rs])
        ci = np.array([r.interval for r in rs])
        err = np.vstack([rates - ci[:, 0], ci[:, 1] - rates])
        line = ax.errorbar(ps, rates, yerr=err, marker="o", capsize=3, linestyle="none", label=f"d={d}")
        if fit is not None and fit.identifiable and len(ps) > 1:
            grid = np.geomspace(ps.min(), ps.max(), 50)
            ax.plot(grid, fit.c * (grid / fit.p_th) ** (fit.alpha * (d + 1) / 2), color=line[0].get_color(),
                    linewidth=1)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("physical error rate p")
    ax.set_ylabel("logical error rate")
    ax.set_title(title, fontsize=9)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def read_results_csv(path) -> list[ResultRow]:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(ResultRow(rec["family"], int(rec["d"]), float(rec["p"]), rec["method"], rec["scheme"],
                                  rec["deflag"] == "true", rec["basis"], int(rec["shots"]), int(rec["failures"]),
                                  int(rec["seed"]), rec["schedule_version"], rec["table_version"],
                                  int(rec.get("budget_exceeded") or 0)))
    return rows
