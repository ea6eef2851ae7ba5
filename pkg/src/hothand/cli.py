"""Command-line pipeline for reproducible batch runs.

Subcommands: preprocess, fit, decode, simulate, gof, compare.  Every run
writes its outputs atomically (temporary file plus rename) and drops a
``<out>.manifest.json`` next to each output recording the resolved
configuration, seed, input digests and tool version; outputs themselves
contain no timestamps, so identical configurations produce byte-identical
files.

Exit codes: 0 success, 2 usage error, 3 input parse/validation error,
4 fit did not converge (the report is still written), 70 internal error.
All diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import sys
import traceback

import numpy as np

from . import __version__
from .core import Dataset, ModelKind, ModelSpec, ParamVector
from .decode import decode_dataset, trajectory_report, write_trajectory_csv
from .estimate import FitResult, OptimizerSettings, aic_table, fit
from .io import ParseError, StructureError, atomic_write_text, load_binary, preprocess, read_raw_throws, save_binary
from .simulate import (
    LegStructure,
    SimulationPlan,
    model_implied_census,
    sequence_census,
    simulate_dataset,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_NONCONVERGENCE = 4
EXIT_INTERNAL = 70

CENSUS_FORMAT = "hothand-census-v1"
PLAN_FORMAT = "hothand-plan-v1"

# Fitted state models should keep essentially no decoded mass in the
# outermost grid intervals; more than this share suggests the range is too
# narrow.
_EDGE_SHARE_WARN = 0.01


def _warn(message: str) -> None:
    print(f"hothand: warning: {message}", file=sys.stderr)


def _error(message: str) -> None:
    print(f"hothand: error: {message}", file=sys.stderr)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return f"sha256:{h.hexdigest()}"


def _write_manifest(out_path, command: str, config: dict, inputs: list, seed=None) -> None:
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "version": __version__,
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    atomic_write_text(f"{out_path}.manifest.json", json.dumps(manifest, indent=2) + "\n")


def _write_json(path, payload: dict) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2) + "\n")


def _write_csv(path, columns, rows) -> None:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_csv_cell(row[c]) for c in columns))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _csv_cell(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _read_fit(path) -> FitResult:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON ({exc.msg})") from None
    try:
        return FitResult.from_dict(data)
    except (ValueError, KeyError, TypeError) as exc:
        raise ParseError(f"{path}: {exc}") from None


def _check_grid_width(dataset: Dataset, result: FitResult) -> None:
    decoded = decode_dataset(dataset, result.params_hat, result.spec)
    m = result.spec.m
    from .grid import build_grid

    grid = build_grid(result.spec.m, result.spec.b0, result.spec.bm)
    edges = set(grid.midpoints[[0, 1, m - 2, m - 1]])
    states = np.concatenate([d.s_star for d in decoded])
    share = float(np.isin(states, list(edges)).mean())
    if share > _EDGE_SHARE_WARN:
        _warn(
            f"{share:.1%} of decoded states fall in the outermost grid intervals; "
            f"consider widening the grid beyond [{result.spec.b0}, {result.spec.bm}]"
        )


# ---------------------------------------------------------------------------
# Subcommands


def cmd_preprocess(args) -> int:
    records = read_raw_throws(args.raw)
    dataset = preprocess(records, truncate_at=args.truncate_at, min_legs=args.min_legs)
    save_binary(dataset, args.out)
    _write_manifest(
        args.out,
        "preprocess",
        {"raw": str(args.raw), "truncate_at": args.truncate_at, "min_legs": args.min_legs},
        [args.raw],
    )
    print(
        f"kept {dataset.n_legs} legs / {dataset.n_throws} throws "
        f"from {dataset.n_players} players -> {args.out}",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_fit(args) -> int:
    dataset = load_binary(args.legs)
    kind = ModelKind.from_string(args.model)
    spec = ModelSpec(kind=kind, m=args.grid_size, b0=-args.grid_bound, bm=args.grid_bound)
    settings = OptimizerSettings(workers=args.threads, compute_ci=not args.no_ci)
    result = fit(dataset, spec, settings=settings)
    _write_json(args.out, result.to_dict())
    _write_manifest(
        args.out,
        "fit",
        {
            "legs": str(args.legs),
            "model": kind.value,
            "grid_size": args.grid_size,
            "grid_bound": args.grid_bound,
            "threads": args.threads,
            "compute_ci": not args.no_ci,
        },
        [args.legs],
        seed=args.seed,
    )
    if kind.has_state:
        _check_grid_width(dataset, result)
    if not result.converged:
        _error("fit did not converge; the written report is marked converged=false")
        return EXIT_NONCONVERGENCE
    print(
        f"{kind.value} loglik={result.loglik:.4f} aic={result.aic:.2f} -> {args.out}",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_decode(args) -> int:
    dataset = load_binary(args.legs)
    result = _read_fit(args.fit)
    if not result.kind.has_state:
        raise ParseError(f"{args.fit}: decoding requires an m3/m4 fit, got {result.kind.value}")
    if result.dataset_digest != dataset.digest():
        _warn("fit was produced on a different dataset than the provided legs")
    decoded = decode_dataset(dataset, result.params_hat, result.spec)
    rows = trajectory_report(decoded, result.params_hat, dataset)
    write_trajectory_csv(rows, args.out)
    _write_manifest(
        args.out, "decode", {"legs": str(args.legs), "fit": str(args.fit)}, [args.legs, args.fit]
    )
    print(f"decoded {len(decoded)} legs -> {args.out}", file=sys.stderr)
    return EXIT_OK


def _plan_from_file(path, seed_override) -> SimulationPlan:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON ({exc.msg})") from None
    if not isinstance(data, dict) or data.get("format") != PLAN_FORMAT:
        raise ParseError(f"{path}: expected a plan object with format={PLAN_FORMAT!r}")
    for key in ("model", "params"):
        if key not in data:
            raise ParseError(f"{path}: plan is missing key {key!r}")
    if ("structure" in data) == ("template" in data):
        raise ParseError(f"{path}: plan must carry exactly one of structure/template")
    seed = seed_override if seed_override is not None else data.get("seed")
    if seed is None:
        raise ParseError(f"{path}: plan has no seed and no --seed was given")
    kind = ModelKind.from_string(data["model"])
    try:
        params = ParamVector.from_dict(data["params"])
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{path}: bad params ({exc})") from None
    if "structure" in data:
        s = data["structure"]
        if not isinstance(s, dict):
            raise ParseError(f"{path}: structure must be an object")
        structure = LegStructure(
            n_players=int(s.get("n_players", 20)),
            legs_per_player=int(s.get("legs_per_player", 150)),
            length_min=int(s.get("length_min", 7)),
            length_max=int(s.get("length_max", 12)),
        )
        return SimulationPlan(seed=int(seed), kind=kind, params=params, structure=structure)
    template = load_binary(data["template"])
    return SimulationPlan(seed=int(seed), kind=kind, params=params, template=template)


def cmd_simulate(args) -> int:
    inputs = []
    if args.plan is not None:
        plan = _plan_from_file(args.plan, args.seed)
        inputs.append(args.plan)
    else:
        if args.fit is None or args.template is None:
            raise ParseError("simulate needs either --plan or both --fit and --template")
        if args.seed is None:
            raise ParseError("--seed is required when simulating from a fit")
        result = _read_fit(args.fit)
        template = load_binary(args.template)
        plan = SimulationPlan(
            seed=args.seed, kind=result.kind, params=result.params_hat, template=template
        )
        inputs.extend([args.fit, args.template])
    dataset = simulate_dataset(plan)
    save_binary(dataset, args.out)
    _write_manifest(
        args.out,
        "simulate",
        {
            "plan": None if args.plan is None else str(args.plan),
            "fit": None if args.fit is None else str(args.fit),
            "template": None if args.template is None else str(args.template),
        },
        inputs,
        seed=args.seed,
    )
    print(
        f"simulated {dataset.n_legs} legs / {dataset.n_throws} throws -> {args.out}",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_gof(args) -> int:
    dataset = load_binary(args.legs)
    result = _read_fit(args.fit)
    if result.dataset_digest != dataset.digest():
        _warn("fit was produced on a different dataset than the provided legs")
    data_census = sequence_census(dataset)
    report = model_implied_census(result, dataset, args.replications, args.seed)
    deviation = np.abs(report.mean - data_census.proportions)
    payload = {
        "format": CENSUS_FORMAT,
        "patterns": list(data_census.as_dict().keys()),
        "data": {
            "proportions": [float(v) for v in data_census.proportions],
            "counts": [int(v) for v in data_census.counts],
            "n_turns": data_census.n_turns,
        },
        "model": report.as_dict(),
        "max_abs_deviation": float(deviation.max()),
    }
    _write_json(args.out, payload)
    _write_manifest(
        args.out,
        "gof",
        {
            "legs": str(args.legs),
            "fit": str(args.fit),
            "replications": args.replications,
        },
        [args.legs, args.fit],
        seed=args.seed,
    )
    print(
        f"census over {data_census.n_turns} turns, "
        f"max |model - data| = {deviation.max():.4f} -> {args.out}",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_compare(args) -> int:
    fits = [_read_fit(path) for path in args.fits]
    try:
        rows = aic_table(fits)
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    columns = ("model", "n_params", "loglik", "aic", "delta_aic", "state_process", "description")
    _write_csv(
        args.out,
        columns,
        [
            {
                "model": r.model,
                "n_params": r.n_params,
                "loglik": r.loglik,
                "aic": r.aic,
                "delta_aic": r.delta_aic,
                "state_process": r.state_process,
                "description": r.description,
            }
            for r in rows
        ],
    )
    _write_manifest(args.out, "compare", {"fits": [str(p) for p in args.fits]}, list(args.fits))
    best = min(rows, key=lambda r: r.aic)
    print(f"best by AIC: {best.model} (aic={best.aic:.2f}) -> {args.out}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hothand",
        description="Fit latent-ability state-space models to binary throwing-success sequences.",
    )
    parser.add_argument("--version", action="version", version=f"hothand {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="raw throw CSV -> binary legs JSONL")
    p.add_argument("--raw", required=True, help="raw throw CSV file")
    p.add_argument("--out", required=True, help="output legs JSONL")
    p.add_argument("--truncate-at", type=int, default=180, help="keep throws with score_before >= this (default 180)")
    p.add_argument("--min-legs", type=int, default=50, help="drop players with fewer retained legs (default 50)")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("fit", help="maximum likelihood fit of one model")
    p.add_argument("--legs", required=True, help="binary legs JSONL")
    p.add_argument("--model", required=True, choices=["m1", "m2", "m3", "m4"])
    p.add_argument("--grid-size", type=int, default=150, help="number of grid intervals (default 150)")
    p.add_argument("--grid-bound", type=float, default=2.5, help="half-width B of the state range [-B, B] (default 2.5)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for per-leg parallel sections (default 1)")
    p.add_argument("--seed", type=int, default=None, help="recorded in the manifest; fitting itself is deterministic")
    p.add_argument("--no-ci", action="store_true", help="skip confidence intervals")
    p.add_argument("--out", required=True, help="output fit JSON")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("decode", help="most likely state trajectories -> CSV")
    p.add_argument("--legs", required=True)
    p.add_argument("--fit", required=True, help="fit JSON from an m3/m4 fit")
    p.add_argument("--out", required=True, help="output trajectories CSV")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("simulate", help="generate a synthetic legs JSONL")
    p.add_argument("--plan", default=None, help="simulation plan JSON")
    p.add_argument("--fit", default=None, help="fit JSON to take model/parameters from")
    p.add_argument("--template", default=None, help="legs JSONL whose structure is mirrored")
    p.add_argument("--seed", type=int, default=None, help="master seed (overrides the plan's)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("gof", help="Monte Carlo sequence-census goodness of fit")
    p.add_argument("--legs", required=True)
    p.add_argument("--fit", required=True)
    p.add_argument("--replications", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output census JSON")
    p.set_defaults(func=cmd_gof)

    p = sub.add_parser("compare", help="AIC comparison table for fits of one dataset")
    p.add_argument("--fits", required=True, nargs="+", help="fit JSON files")
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, StructureError, FileNotFoundError) as exc:
        _error(str(exc))
        return EXIT_PARSE
    except ValueError as exc:
        _error(str(exc))
        return EXIT_PARSE
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    raise SystemExit(main())
