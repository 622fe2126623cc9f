"""Held-out (test split) evaluation of a candidate workspace for one task."""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .scoring import TaskScore, score_task
from .tasks import SolutionVerdict, TaskDefinition, instance_refs
from .timing import BuildError, ReferenceSolver, RunLimits, TimingRecord, prepare_candidate, run_suite


@dataclass
class TaskEvaluation:
    score: TaskScore
    ref_records: list[TimingRecord]
    cand_records: list[TimingRecord]
    build_error: str | None = None
    ref_runs: list[list[TimingRecord]] = field(default_factory=list, repr=False)


def min_across_runs(runs: Sequence[Sequence[TimingRecord]]) -> list[TimingRecord]:
    """Merge repeated suite runs: per instance, all samples pooled and the
    minimum kept; any failed run makes the merged record that failure."""
    merged = []
    for per_instance in zip(*runs):
        bad = next((r for r in per_instance if r.status != "ok"), None)
        if bad is not None:
            merged.append(bad)
            continue
        samples = [s for r in per_instance for s in r.samples_ns]
        first = per_instance[0]
        merged.append(TimingRecord(first.instance, samples, min(samples), first.verdict, "ok"))
    return merged


def evaluate_candidate(
    task: TaskDefinition,
    workspace: Path | str,
    n: int,
    *,
    test_count: int = 100,
    test_seed_base: int = 1000,
    repeats: int = 10,
    timing_runs: int = 3,
    limits: RunLimits | None = None,
    mode: str = "ratio_of_sums",
    reference_runs: Sequence[Sequence[TimingRecord]] | None = None,
) -> TaskEvaluation:
    """Time reference and candidate on the test split and score the candidate.

    Both solvers run ``timing_runs`` full suites; per instance the minimum over
    all runs is kept.  A candidate that fails to build scores as all-crashed.
    """
    limits = limits or RunLimits()
    refs = instance_refs(task.task_id, n, "test", test_count, test_seed_base)
    if reference_runs is None:
        reference_runs = [run_suite(ReferenceSolver(task), task, refs, repeats, limits) for _ in range(timing_runs)]
    ref = min_across_runs(reference_runs)
    build_error = None
    try:
        handle = prepare_candidate(workspace, limits, task)
    except BuildError as exc:
        build_error = str(exc)
        reason = f"build failed: {exc}"
        cand = [TimingRecord(r, [], None, SolutionVerdict.reject(reason), "crash", traceback=exc.output or None)
                for r in refs]
    else:
        baselines = [r.min_ns for r in ref]
        cand = min_across_runs([run_suite(handle, task, refs, repeats, limits, baselines)
                                for _ in range(timing_runs)])
    score = score_task(ref, cand, mode=mode, task_id=task.task_id)
    score.n = n
    score.ref_run_means_ms = [
        statistics.fmean(r.min_ns for r in run) / 1e6
        for run in reference_runs if all(r.min_ns is not None for r in run)
    ]
    return TaskEvaluation(score, ref, cand, build_error, [list(r) for r in reference_runs])
