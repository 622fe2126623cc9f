"""Append-only JSON-lines results file.

Every line is one record ``{"v": 1, "kind": ..., "run_id": ..., "ts": ..., ...}``
with ``kind`` one of ``qa``, ``calibration``, ``timing``, ``task_score``,
``report``, ``agent_event``.
"""

from __future__ import annotations

import json
import time
import uuid
from pathlib import Path
from typing import Iterator

SCHEMA_VERSION = 1
KINDS = ("qa", "calibration", "timing", "task_score", "report", "agent_event")


def new_run_id() -> str:
    return time.strftime("%Y%m%dT%H%M%S") + "-" + uuid.uuid4().hex[:8]


class ResultsWriter:
    def __init__(self, path: Path | str, run_id: str | None = None):
        self.path = Path(path)
        self.run_id = run_id or new_run_id()
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def write(self, kind: str, data: dict) -> dict:
        if kind not in KINDS:
            raise ValueError(f"unknown record kind {kind!r}")
        record = {"v": SCHEMA_VERSION, "kind": kind, "run_id": self.run_id, "ts": time.time(), **data}
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, default=_fallback) + "\n")
        return record


def _fallback(obj):
    tolist = getattr(obj, "tolist", None)
    if callable(tolist):
        return tolist()
    if isinstance(obj, (bytes, bytearray)):
        return obj.hex()
    if isinstance(obj, Path):
        return str(obj)
    return repr(obj)


def read_results(path: Path | str, kind: str | None = None) -> Iterator[dict]:
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            if record.get("v") != SCHEMA_VERSION:
                raise ValueError(f"{path}:{lineno}: unsupported schema version {record.get('v')!r}")
            if kind is None or record.get("kind") == kind:
                yield record
