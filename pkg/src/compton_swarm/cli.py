"""Command-line interface: run, montecarlo, metrics, plotdata.

Exit codes for `run`: 0 normal termination, 2 invalid configuration,
3 scenario ended without ever acquiring an initial hypothesis.
"""

from __future__ import annotations

import argparse
import os
import sys
from datetime import datetime
from pathlib import Path

from .config import ConfigError, load_config
from .metrics import compute_metrics, metrics_to_json, write_metrics
from .montecarlo import aggregate, run_batch, write_runs_csv, write_summary_csv
from .plotting import PLOT_KINDS, emit_plotdata
from .runlog import RunLog, SchemaVersionError
from .simulation import run_scenario

OUT_ROOT_ENV = "COMPTON_SWARM_OUT"


def _default_out_dir(seed: int) -> Path:
    root = Path(os.environ.get(OUT_ROOT_ENV, "out"))
    stamp = datetime.now().strftime("%Y%m%d-%H%M%S")
    return root / f"{stamp}-{seed}"


def _cmd_run(args) -> int:
    try:
        raw, scenario = load_config(args.config)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    seed = args.seed if args.seed is not None else scenario.seed
    out_dir = Path(args.out) if args.out else _default_out_dir(seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    log = run_scenario(scenario, seed)
    log.to_jsonl(out_dir / "runlog.jsonl")
    metrics = compute_metrics(log)
    write_metrics(metrics, out_dir / "metrics.json")
    print(f"wrote {out_dir / 'runlog.jsonl'} and {out_dir / 'metrics.json'}")
    if metrics["time_to_x0"] is None:
        print("initialization never achieved", file=sys.stderr)
        return 3
    return 0


def _cmd_montecarlo(args) -> int:
    try:
        raw, _ = load_config(args.config)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    out_dir = Path(args.out) if args.out else _default_out_dir(args.seed_base)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = run_batch(raw, args.runs, args.seed_base, jobs=args.jobs)
    summary = aggregate(rows)
    write_runs_csv(rows, out_dir / "runs.csv")
    write_summary_csv(summary, out_dir / "summary.csv")
    print(f"wrote {out_dir / 'runs.csv'} and {out_dir / 'summary.csv'}")
    if summary["failed"] == summary["runs"]:
        print("all runs failed", file=sys.stderr)
        return 1
    return 0


def _cmd_metrics(args) -> int:
    try:
        log = RunLog.from_jsonl(args.runlog)
    except SchemaVersionError as exc:
        print(f"schema version mismatch: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    metrics = compute_metrics(log)
    payload = metrics_to_json(metrics)
    sys.stdout.write(payload)
    reference = Path(args.check) if args.check else Path(args.runlog).parent / "metrics.json"
    if reference.exists():
        stored = reference.read_text(encoding="utf-8")
        if stored != payload:
            print(f"mismatch against {reference}", file=sys.stderr)
            return 1
        print(f"recomputed metrics match {reference}", file=sys.stderr)
    return 0


def _cmd_plotdata(args) -> int:
    try:
        log = RunLog.from_jsonl(args.runlog)
    except (SchemaVersionError, ValueError) as exc:
        print(str(exc), file=sys.stderr)
        return 1
    out_dir = Path(args.out) if args.out else Path(args.runlog).parent
    csv_path, png_path = emit_plotdata(log, args.kind, out_dir,
                                       render=not args.no_render)
    print(f"wrote {csv_path}" + (f" and {png_path}" if png_path else ""))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="compton-swarm",
        description="Cooperative gamma-source localization simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one scenario")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default=None)
    p_run.set_defaults(func=_cmd_run)

    p_mc = sub.add_parser("montecarlo", help="run a seeded batch and aggregate")
    p_mc.add_argument("--config", required=True)
    p_mc.add_argument("--runs", type=int, required=True)
    p_mc.add_argument("--seed-base", type=int, default=0)
    p_mc.add_argument("--jobs", type=int, default=1)
    p_mc.add_argument("--out", default=None)
    p_mc.set_defaults(func=_cmd_montecarlo)

    p_metrics = sub.add_parser("metrics", help="recompute metrics from a run log")
    p_metrics.add_argument("--runlog", required=True)
    p_metrics.add_argument("--truth-source", choices=["runlog"], default="runlog",
                           help="where ground truth comes from (run log records)")
    p_metrics.add_argument("--check", default=None,
                           help="metrics.json to compare against (default: sibling)")
    p_metrics.set_defaults(func=_cmd_metrics)

    p_plot = sub.add_parser("plotdata", help="emit tidy CSV series and a figure")
    p_plot.add_argument("--runlog", required=True)
    p_plot.add_argument("--kind", required=True, choices=list(PLOT_KINDS))
    p_plot.add_argument("--out", default=None)
    p_plot.add_argument("--no-render", action="store_true",
                        help="skip the PNG, CSV only")
    p_plot.set_defaults(func=_cmd_plotdata)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
