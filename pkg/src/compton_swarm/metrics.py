"""Run metrics recomputed from a RunLog.

The estimation error is the horizontal (2D) distance between the logged
world-frame hypothesis and the true source at the same tick; the source
sits on the ground plane and flight altitude is fixed, so the vertical
component carries no information about localization quality.
"""

from __future__ import annotations

import json
import math

from .runlog import RunLog

METRICS_SCHEMA_VERSION = 1

# Error series are taken from this agent's filter; all agents fuse the
# same cone stream (modulo bus latency) so their estimates track closely.
REFERENCE_AGENT = 0


def compute_metrics(log: RunLog) -> dict:
    """RunMetrics dict (JSON-serializable, deterministic key order)."""
    meta = log.meta
    source_at = {}
    for t, kind, _, payload in log.records:
        if kind == "source":
            source_at[t] = payload["pos"]

    series = []
    for t, kind, agent_id, payload in log.records:
        if kind != "hypothesis" or agent_id not in (REFERENCE_AGENT, None):
            continue
        src = source_at.get(t)
        if src is None:
            continue
        x = payload["x_world"]
        err = math.hypot(x[0] - src[0], x[1] - src[1])
        series.append([t, err])

    termination = log.of_kind("termination")
    term = termination[-1][3] if termination else {}
    errors = [e for _, e in series]
    errors_sorted = sorted(errors)

    def median(vals):
        if not vals:
            return None
        k = len(vals)
        mid = k // 2
        return vals[mid] if k % 2 else 0.5 * (vals[mid - 1] + vals[mid])

    return {
        "metrics_schema_version": METRICS_SCHEMA_VERSION,
        "seed": meta.get("seed"),
        "time_to_x0": term.get("time_to_x0"),
        "tracking_time": term.get("tracking_time", 0.0),
        "termination_reason": term.get("reason"),
        "error_median": median(errors_sorted),
        "error_mean": (sum(errors) / len(errors)) if errors else None,
        "n_error_samples": len(errors),
        "error_series": series,
    }


def metrics_to_json(metrics: dict) -> str:
    return json.dumps(metrics, sort_keys=True, separators=(",", ":")) + "\n"


def write_metrics(metrics: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(metrics_to_json(metrics))
