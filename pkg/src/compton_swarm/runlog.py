"""Append-only scenario record with deterministic JSON Lines round-trip.

Record kinds and payload fields are documented in docs/formats.md and
pinned by golden tests; bump SCHEMA_VERSION on any incompatible change.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

SCHEMA_VERSION = 1


class SchemaVersionError(RuntimeError):
    """Run log was written by an incompatible schema version."""


@dataclass
class RunLog:
    """Timestamped records of one deterministic scenario run.

    Records are (t, kind, agent_id, payload) with nondecreasing t; kind is
    one of: meta, state, source, event, hypothesis, stage, init_failed,
    correction_skipped, termination.
    """

    records: list = field(default_factory=list)

    def append(self, t: float, kind: str, agent_id, payload: dict):
        if self.records and t < self.records[-1][0] - 1e-12:
            raise ValueError("record timestamps must be nondecreasing")
        self.records.append((float(t), kind, agent_id, payload))

    def of_kind(self, kind: str):
        return [r for r in self.records if r[1] == kind]

    @property
    def meta(self) -> dict:
        if not self.records or self.records[0][1] != "meta":
            raise ValueError("run log has no meta record")
        return self.records[0][3]

    def to_jsonl(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_jsonl_str())

    def to_jsonl_str(self) -> str:
        lines = []
        for t, kind, agent_id, payload in self.records:
            lines.append(json.dumps(
                {"t": t, "kind": kind, "agent_id": agent_id, "payload": payload},
                sort_keys=True, separators=(",", ":")))
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_jsonl(path) -> "RunLog":
        log = RunLog()
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{path}: parse error at line {lineno}: {exc}") from exc
                log.records.append((rec["t"], rec["kind"], rec["agent_id"], rec["payload"]))
        if not log.records:
            raise ValueError(f"{path}: empty run log")
        meta = log.meta
        if meta.get("schema_version") != SCHEMA_VERSION:
            raise SchemaVersionError(
                f"run log schema_version {meta.get('schema_version')!r} != {SCHEMA_VERSION}")
        return log
