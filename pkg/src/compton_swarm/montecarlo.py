"""Monte Carlo experiment runner with deterministic aggregation.

Each run gets seed `seed_base + i` and a source start randomized from a
salted substream of that seed, so results are reproducible and identical
regardless of worker-pool size; aggregation is an ordered reduction over
seeds.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .config import build_scenario
from .metrics import compute_metrics
from .simulation import run_scenario

_SOURCE_SALT = 0x50A2CE

RUNS_CSV_COLUMNS = [
    "seed", "status", "termination_reason", "time_to_x0", "tracking_time",
    "error_median", "error_mean", "n_error_samples",
]
SUMMARY_CSV_COLUMNS = [
    "runs", "failed", "never_initialized", "tracking_complete_fraction",
    "time_to_x0_median", "time_to_x0_max", "tracking_time_avg",
    "tracking_time_max", "error_median", "per_run_error_median",
]


def randomize_source_start(raw: dict, seed: int) -> dict:
    """Per-run copy of the config with the source start randomized.

    Static sources land uniformly in the area; circular scripts get a
    uniform initial angle on their circle; waypoint scripts are kept
    as authored.
    """
    rng = np.random.default_rng([seed, _SOURCE_SALT])
    cfg = {k: (dict(v) if isinstance(v, dict) else v) for k, v in raw.items()}
    src = dict(cfg.get("source", {}))
    kind = src.get("kind", "static")
    area = cfg.get("area", {})
    if kind == "static":
        x = float(rng.uniform(area.get("x_min", 0.0), area.get("x_max", 100.0)))
        y = float(rng.uniform(area.get("y_min", 0.0), area.get("y_max", 100.0)))
        z = src.get("position", [50.0, 50.0, 0.0])[2]
        src["position"] = [x, y, z]
    elif kind == "circular":
        src["phase"] = float(rng.uniform(0.0, 2.0 * math.pi))
    cfg["source"] = src
    return cfg


def run_single(raw: dict, seed: int, randomize_source: bool = True) -> dict:
    """One Monte Carlo run reduced to its metrics row."""
    run_raw = randomize_source_start(raw, seed) if randomize_source else raw
    try:
        scenario = build_scenario(run_raw)
        log = run_scenario(scenario, seed)
        metrics = compute_metrics(log)
    except Exception as exc:  # recorded per-row, never aborts the batch
        return {"seed": seed, "status": f"error: {type(exc).__name__}: {exc}"}
    metrics["seed"] = seed
    metrics["status"] = "ok"
    return metrics


def _worker(args):
    raw, seed = args
    return run_single(raw, seed)


def run_batch(raw: dict, runs: int, seed_base: int, jobs: int = 1) -> list[dict]:
    """Rows for seeds seed_base..seed_base+runs-1, ordered by seed."""
    if runs < 1:
        raise ValueError("need at least one run")
    tasks = [(raw, seed_base + i) for i in range(runs)]
    if jobs <= 1:
        return [_worker(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_worker, tasks))


def _median(vals):
    if not vals:
        return None
    vals = sorted(vals)
    mid = len(vals) // 2
    return vals[mid] if len(vals) % 2 else 0.5 * (vals[mid - 1] + vals[mid])


def aggregate(rows: list[dict]) -> dict:
    """Summary statistics over the per-run rows (failed runs excluded)."""
    ok = [r for r in rows if r.get("status") == "ok"]
    t_x0 = [r["time_to_x0"] for r in ok if r.get("time_to_x0") is not None]
    tracking = [r["tracking_time"] for r in ok]
    pooled_errors = []
    per_run_medians = []
    complete = 0
    for r in ok:
        pooled_errors.extend(e for _, e in r.get("error_series", []))
        if r.get("error_median") is not None:
            per_run_medians.append(r["error_median"])
        if r.get("termination_reason") == "tracking_complete":
            complete += 1
    return {
        "runs": len(rows),
        "failed": len(rows) - len(ok),
        "never_initialized": sum(1 for r in ok if r.get("time_to_x0") is None),
        "tracking_complete_fraction": (complete / len(ok)) if ok else None,
        "time_to_x0_median": _median(t_x0),
        "time_to_x0_max": max(t_x0) if t_x0 else None,
        "tracking_time_avg": (sum(tracking) / len(tracking)) if tracking else None,
        "tracking_time_max": max(tracking) if tracking else None,
        "error_median": _median(pooled_errors),
        "per_run_error_median": _median(per_run_medians),
    }


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_runs_csv(rows: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RUNS_CSV_COLUMNS)
        for r in rows:
            writer.writerow([_cell(r.get(col)) for col in RUNS_CSV_COLUMNS])


def write_summary_csv(summary: dict, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_CSV_COLUMNS)
        writer.writerow([_cell(summary.get(col)) for col in SUMMARY_CSV_COLUMNS])
