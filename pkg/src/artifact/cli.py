"""Command-line entry point: ``artifact {estimate,run,fit,validate,export}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .circuit import build_estimation_circuit, build_memory_experiment, circuit_to_text
from .deflag import rules_table
from .experiment import (ExperimentConfig, emit_outputs, fit_results, read_results_csv, run_experiment,
                         write_fit_csv)
from .geometry import build_color_code, code_to_json
from .noise import NoiseModel
from .validation import validate_family
from .weights import estimate_conditional_probs

log = logging.getLogger("artifact")


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _cmd_estimate(args) -> int:
    code = build_color_code(args.family, args.d)
    side = args.side.upper()
    table = estimate_conditional_probs(code, side, NoiseModel(args.p), args.samples, args.seed, deflag=args.deflag)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    table.save(args.out)
    print(f"wrote {args.out} ({table.samples} samples, seed {args.seed})")
    return 0


_OVERRIDES = {
    "family": "family", "distances": "distances", "p": "p_grid", "method": "method", "scheme": "scheme",
    "deflag": "deflag", "shots": "shots", "seed": "seed", "bases": "bases", "tables": "table_path",
    "out": "output_path", "estimate_missing": "estimate_missing", "estimation_samples": "estimation_samples",
    "node_limit": "node_limit", "strict": "strict", "workers": "workers", "shard": "shard",
    "fit_window": "fit_window", "plots": "plots",
}


def _cmd_run(args) -> int:
    data = ExperimentConfig.load(args.config).to_dict() if args.config else {}
    for arg, key in _OVERRIDES.items():
        val = getattr(args, arg)
        if val is not None:
            data[key] = val
    if args.method is not None or args.scheme is not None or args.deflag is not None:
        data["variants"] = []
    config = ExperimentConfig.from_dict(data)
    rows = run_experiment(config)
    fits = fit_results(rows, config.fit_window)
    for path in emit_outputs(rows, fits, config.output_path, plots=config.plots):
        print(f"wrote {path}")
    print(f"master seed {config.seed}")
    return 0


def _cmd_fit(args) -> int:
    rows = read_results_csv(args.results)
    fits = fit_results(rows, tuple(args.window) if args.window else None)
    if not fits:
        print("no series has enough data for a fit", file=sys.stderr)
        return 1
    res = Path(args.results)
    out = Path(args.out) if args.out else res.with_name(res.stem + "_fit.csv")
    print(f"wrote {write_fit_csv(fits, out)}")
    return 0


def _cmd_validate(args) -> int:
    checks = validate_family(args.family, args.distances, shots=args.shots, seed=args.seed,
                             distance_search=not args.skip_distance)
    for c in checks:
        print(c.line())
    failed = sum(not c.ok for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return 1 if failed else 0


def _cmd_export(args) -> int:
    code = build_color_code(args.family, args.d)
    if args.what == "code":
        text = code_to_json(code)
    elif args.what == "circuit":
        circ = (build_estimation_circuit(code, args.side) if args.side
                else build_memory_experiment(code, args.method, args.basis))
        text = circuit_to_text(circ)
    else:
        text = rules_table(build_memory_experiment(code, "flagged", args.basis))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="artifact", description="Flag-conditioned color-code memory experiments.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0, help="log progress (-vv for debug)")
    sub = ap.add_subparsers(dest="command", required=True)

    e = sub.add_parser("estimate", parents=[common], help="estimate a conditional probability table (JSON)")
    e.add_argument("--family", default="C488", choices=["C488", "C666"])
    e.add_argument("--d", type=int, required=True)
    e.add_argument("--p", type=float, required=True)
    e.add_argument("--side", default="CZ", choices=["CX", "CZ", "cx", "cz"])
    e.add_argument("--samples", type=int, default=1_000_000)
    e.add_argument("--seed", type=int, required=True)
    e.add_argument("--deflag", type=_bool, default=True)
    e.add_argument("--out", required=True)
    e.set_defaults(func=_cmd_estimate)

    r = sub.add_parser("run", parents=[common], help="run memory experiments and write CSV outputs")
    r.add_argument("--config", help="JSON experiment config; flags below override its fields")
    r.add_argument("--family", choices=["C488", "C666"])
    r.add_argument("--distances", type=int, nargs="+")
    r.add_argument("--p", type=float, nargs="+", help="physical error rate grid")
    r.add_argument("--method", choices=["single_ancilla", "flagged"])
    r.add_argument("--scheme", choices=["uniform", "conventional", "flagged"])
    r.add_argument("--deflag", type=_bool)
    r.add_argument("--shots", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--bases", nargs="+", choices=["X", "Z"])
    r.add_argument("--tables", help="directory of probability tables")
    r.add_argument("--estimate-missing", type=_bool, help="estimate and store tables that are not found")
    r.add_argument("--estimation-samples", type=int)
    r.add_argument("--node-limit", type=int)
    r.add_argument("--strict", type=_bool, help="count decode-budget overruns as failures")
    r.add_argument("--workers", type=int)
    r.add_argument("--shard", type=int)
    r.add_argument("--fit-window", type=float, nargs=2)
    r.add_argument("--plots", type=_bool)
    r.add_argument("--out", help="results CSV path")
    r.set_defaults(func=_cmd_run)

    f = sub.add_parser("fit", parents=[common], help="fit the scaling law to a results CSV")
    f.add_argument("results")
    f.add_argument("--window", type=float, nargs=2)
    f.add_argument("--out", help="fit CSV path (default: <results stem>_fit.csv)")
    f.set_defaults(func=_cmd_fit)

    v = sub.add_parser("validate", parents=[common], help="run the invariant suite")
    v.add_argument("--family", default="C488", choices=["C488", "C666"])
    v.add_argument("--distances", type=int, nargs="+", default=[3, 5])
    v.add_argument("--shots", type=int, default=1000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--skip-distance", action="store_true", help="skip the minimum logical weight search")
    v.set_defaults(func=_cmd_validate)

    x = sub.add_parser("export", parents=[common], help="print a code, circuit or deflag rule table")
    x.add_argument("what", choices=["code", "circuit", "rules"])
    x.add_argument("--family", default="C488", choices=["C488", "C666"])
    x.add_argument("--d", type=int, default=3)
    x.add_argument("--method", default="flagged", choices=["single_ancilla", "flagged"])
    x.add_argument("--basis", default="Z", choices=["X", "Z"])
    x.add_argument("--side", choices=["CX", "CZ"], help="export an estimation circuit instead")
    x.add_argument("--out")
    x.set_defaults(func=_cmd_export)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
