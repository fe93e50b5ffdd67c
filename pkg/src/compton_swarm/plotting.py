"""Plot-data extraction from run logs: tidy CSV plus rendered figures.

The CSV layout is the compatibility surface (documented in
docs/formats.md); the PNG rendered next to each CSV is a convenience view
of the same series.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .runlog import RunLog  # noqa: E402

PLOT_KINDS = ("paths", "spacing", "speed", "error")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


class _LogView:
    """Per-tick view over the record stream with forward-filled hypothesis."""

    def __init__(self, log: RunLog):
        self.meta = log.meta
        self.n_agents = self.meta["n_agents"]
        self.states = {i: {} for i in range(self.n_agents)}
        self.source = {}
        self.hypothesis_events = []
        for t, kind, agent_id, payload in log.records:
            if kind == "state":
                self.states[agent_id][t] = payload
            elif kind == "source":
                self.source[t] = payload["pos"]
            elif kind == "hypothesis" and agent_id in (0, None):
                self.hypothesis_events.append((t, payload["x_world"]))
        self.ticks = sorted(self.states[0].keys()) if self.n_agents else []

    def hypothesis_at_ticks(self):
        """Latest hypothesis per tick (None before initialization)."""
        out = {}
        latest = None
        events = self.hypothesis_events
        j = 0
        for t in self.ticks:
            while j < len(events) and events[j][0] <= t:
                latest = events[j][1]
                j += 1
            out[t] = latest
        return out


def extract_plotdata(log: RunLog, kind: str):
    """(header, rows) for one plot kind."""
    if kind not in PLOT_KINDS:
        raise ValueError(f"unknown plot kind {kind!r}; choose from {PLOT_KINDS}")
    view = _LogView(log)
    n = view.n_agents
    agent_cols = [f"agent_{i}" for i in range(n)]

    if kind == "paths":
        header = ["t", "series", "x", "y"]
        hyp = view.hypothesis_at_ticks()
        rows = []
        for t in view.ticks:
            for i in range(n):
                pos = view.states[i][t]["pos"]
                rows.append([t, f"agent_{i}", pos[0], pos[1]])
            h = hyp[t]
            rows.append([t, "hypothesis", h[0] if h else None, h[1] if h else None])
            src = view.source.get(t)
            rows.append([t, "source", src[0] if src else None, src[1] if src else None])
        return header, rows

    if kind == "speed":
        header = ["t"] + agent_cols
        rows = []
        for t in view.ticks:
            speeds = []
            for i in range(n):
                v = view.states[i][t]["vel"]
                speeds.append(math.hypot(v[0], v[1], v[2]))
            rows.append([t] + speeds)
        return header, rows

    if kind == "spacing":
        header = ["t"] + agent_cols
        spacing_target = 2.0 * math.pi / n if n else 0.0
        hyp = view.hypothesis_at_ticks()
        rows = []
        for t in view.ticks:
            h = hyp[t]
            if h is None:
                continue
            phis = []
            for i in range(n):
                pos = view.states[i][t]["pos"]
                phis.append(math.atan2(pos[1] - h[1], pos[0] - h[0]))
            values = []
            for i in range(n):
                if n < 2:
                    values.append(None)
                    continue
                diffs = [abs((phis[j] - phis[i] + math.pi) % (2 * math.pi) - math.pi)
                         for j in range(n) if j != i]
                values.append(abs(spacing_target - min(diffs)))
            rows.append([t] + values)
        return header, rows

    # error: horizontal distance hypothesis vs truth at hypothesis updates
    header = ["t", "error_m"]
    rows = []
    for t, x in view.hypothesis_events:
        src = view.source.get(t)
        if src is None:
            continue
        rows.append([t, math.hypot(x[0] - src[0], x[1] - src[1])])
    return header, rows


def write_plotdata_csv(header, rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def render_figure(log: RunLog, kind: str, header, rows, path) -> None:
    """Matplotlib rendering of one plot kind to an image file."""
    meta = log.meta
    n = meta["n_agents"]
    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    if kind == "paths":
        series = {}
        for t, name, x, y in rows:
            if x is None:
                continue
            series.setdefault(name, ([], []))
            series[name][0].append(x)
            series[name][1].append(y)
        for i in range(n):
            name = f"agent_{i}"
            if name in series:
                ax.plot(*series[name], lw=0.8, label=name)
        if "source" in series:
            ax.plot(*series["source"], "k--", lw=1.2, label="source")
        if "hypothesis" in series:
            ax.plot(*series["hypothesis"], "r-", lw=1.2, label="hypothesis")
        ax.set_xlabel("x [m]")
        ax.set_ylabel("y [m]")
        ax.set_aspect("equal", adjustable="datalim")
        ax.legend(fontsize=8)
    elif kind in ("spacing", "speed"):
        ts = [row[0] for row in rows]
        for i in range(n):
            ax.plot(ts, [row[1 + i] for row in rows], lw=0.9, label=f"agent_{i}")
        if kind == "speed" and "flock" in meta:
            ax.axhline(meta["flock"]["v"], color="k", ls=":", lw=1.0, label="target v")
        ax.set_xlabel("t [s]")
        ax.set_ylabel("|spacing error| [rad]" if kind == "spacing" else "speed [m/s]")
        ax.legend(fontsize=8)
    else:  # error
        ax.plot([r[0] for r in rows], [r[1] for r in rows], lw=0.9)
        ax.set_xlabel("t [s]")
        ax.set_ylabel("estimation error [m]")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def emit_plotdata(log: RunLog, kind: str, out_dir, render: bool = True):
    """Write <kind>.csv (and <kind>.png unless disabled); returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    header, rows = extract_plotdata(log, kind)
    csv_path = out_dir / f"{kind}.csv"
    write_plotdata_csv(header, rows, csv_path)
    png_path = None
    if render:
        png_path = out_dir / f"{kind}.png"
        render_figure(log, kind, header, rows, png_path)
    return csv_path, png_path
