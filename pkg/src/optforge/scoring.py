"""Per-task speedups, the harmonic-mean benchmark score, and budget curves."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

from .timing import TimingRecord

SPED_UP_THRESHOLD = 1.1
MODES = ("ratio_of_sums", "mean_of_ratios")


class ScoringError(ValueError):
    pass


@dataclass
class TaskScore:
    task_id: str
    ref_total_ns: int
    cand_total_ns: int
    raw_speedup: float | None
    recorded_speedup: float
    valid_fraction: float
    timeout_fraction: float
    sped_up: bool
    instance_count: int = 0
    n: int | None = None
    # per timing run, mean reference time over the instances (ms)
    ref_run_means_ms: list[float] = field(default_factory=list)

    @property
    def invalid_fraction(self) -> float:
        return max(0.0, 1.0 - self.valid_fraction - self.timeout_fraction)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TaskScore":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


@dataclass
class BenchmarkReport:
    task_scores: list[TaskScore]
    aggregate_score: float
    sped_up_pct: float
    metadata: dict = field(default_factory=dict)

    @property
    def backend(self) -> str:
        return str(self.metadata.get("backend", "candidate"))

    def to_dict(self) -> dict:
        return {
            "task_scores": [s.to_dict() for s in self.task_scores],
            "aggregate_score": self.aggregate_score,
            "sped_up_pct": self.sped_up_pct,
            "metadata": dict(self.metadata),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BenchmarkReport":
        return cls(
            task_scores=[TaskScore.from_dict(s) for s in d["task_scores"]],
            aggregate_score=d["aggregate_score"],
            sped_up_pct=d["sped_up_pct"],
            metadata=dict(d.get("metadata", {})),
        )


def harmonic_mean(values: Sequence[float]) -> float:
    if not values:
        raise ScoringError("harmonic mean of an empty set")
    if any(v <= 0 for v in values):
        raise ScoringError("speedups must be positive")
    return len(values) / math.fsum(1.0 / v for v in values)


def score_task(
    ref_records: Sequence[TimingRecord],
    cand_records: Sequence[TimingRecord],
    mode: str = "ratio_of_sums",
    task_id: str | None = None,
) -> TaskScore:
    """Score one task.

    Any candidate record that is not ``ok`` collapses the recorded speedup to
    1.0; otherwise the recorded speedup is the raw speedup floored at 1.0.
    """
    if mode not in MODES:
        raise ScoringError(f"unknown speedup mode {mode!r}")
    if not ref_records:
        raise ScoringError("no records to score")
    ref_by = {r.instance: r for r in ref_records}
    cand_by = {r.instance: r for r in cand_records}
    if (len(ref_by) != len(ref_records) or len(cand_by) != len(cand_records)
            or set(ref_by) != set(cand_by)):
        raise ScoringError("reference and candidate records cover different instance sets")
    task_ids = {ref.task_id for ref in ref_by}
    if len(task_ids) != 1:
        raise ScoringError(f"records span several tasks: {sorted(task_ids)}")
    bad_ref = [r.instance for r in ref_records if r.status != "ok" or r.min_ns is None]
    if bad_ref:
        raise ScoringError(f"reference solver did not succeed on {len(bad_ref)} instance(s)")

    count = len(ref_records)
    ref_total = sum(r.min_ns for r in ref_records)
    cand_total = sum(r.min_ns for r in cand_records if r.min_ns is not None)
    valid = sum(1 for r in cand_records if r.status == "ok")
    timeouts = sum(1 for r in cand_records if r.status == "timeout")

    raw = None
    if valid == count:
        if mode == "ratio_of_sums":
            raw = ref_total / max(cand_total, 1)
        else:
            raw = math.fsum(ref_by[k].min_ns / max(cand_by[k].min_ns, 1) for k in ref_by) / count
        recorded = max(1.0, raw)
    else:
        recorded = 1.0
    return TaskScore(
        task_id=task_id or next(iter(task_ids)),
        ref_total_ns=ref_total,
        cand_total_ns=cand_total,
        raw_speedup=raw,
        recorded_speedup=recorded,
        valid_fraction=valid / count,
        timeout_fraction=timeouts / count,
        sped_up=recorded >= SPED_UP_THRESHOLD,
        instance_count=count,
        n=next(iter(ref_by)).n,
    )


def aggregate(scores: Sequence[TaskScore], metadata: dict | None = None) -> BenchmarkReport:
    if not scores:
        raise ScoringError("cannot aggregate an empty score list")
    speedups = [s.recorded_speedup for s in scores]
    return BenchmarkReport(
        task_scores=list(scores),
        aggregate_score=harmonic_mean(speedups),
        sped_up_pct=100.0 * sum(1 for s in scores if s.sped_up) / len(scores),
        metadata=dict(metadata or {}),
    )


def budget_curve(events: Iterable[dict], checkpoints: Sequence[float]) -> list[tuple[float, float]]:
    """Dev-set score of the best snapshot available at each spend checkpoint.

    ``events`` are agent event dicts; those with ``event == "snapshot"`` carry
    ``task_id``, ``spent`` and ``dev_speedup``.  Tasks seen in the log but
    without a snapshot by a checkpoint score 1.0 there.  Across tasks the
    scores are combined with the harmonic mean.
    """
    checkpoints = list(checkpoints)
    if any(b < a for a, b in zip(checkpoints, checkpoints[1:])):
        raise ValueError("checkpoints must be ascending")
    snapshots = defaultdict(list)
    tasks = set()
    for ev in events:
        if "task_id" in ev:
            tasks.add(ev["task_id"])
        if ev.get("event") == "snapshot":
            snapshots[ev["task_id"]].append((float(ev["spent"]), float(ev["dev_speedup"])))
    curve = []
    for c in checkpoints:
        if not tasks:
            curve.append((c, 1.0))
            continue
        per_task = []
        for t in sorted(tasks):
            best = max((s for spent, s in snapshots[t] if spent <= c + 1e-12), default=1.0)
            per_task.append(max(1.0, best))
        curve.append((c, harmonic_mean(per_task)))
    return curve
