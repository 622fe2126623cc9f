"""Automatic checks for contributed tasks.

Two checks: the reference runtime must grow with ``n``, and the verifier must
accept reference outputs produced under different solver seeds (verifiers
that only accept one of several valid answers fail here).
"""

from __future__ import annotations

import os
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

from .tasks import (
    SOLVER_SEED_ENV,
    InstanceRef,
    ProblemInstance,
    Registry,
    SolverError,
    TaskDefinition,
    generate_problem,
    reference_solve,
    verify,
)
from .timing import ReferenceSolver, RunLimits, run_suite

MONOTONICITY_SLACK = 0.10
MIN_GROWTH = 1.5


@dataclass
class QaReport:
    task_id: str
    monotonicity_pass: bool | None = None
    sizes: list[int] = field(default_factory=list)
    runtimes_ns: list[int | None] = field(default_factory=list)
    seed_robustness_pass: bool | None = None
    # (instance seed, solver seed, valid, reason)
    seed_verdicts: list[tuple[int, int, bool, str | None]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.monotonicity_pass) and bool(self.seed_robustness_pass)

    def merge(self, other: "QaReport") -> "QaReport":
        if other.monotonicity_pass is not None:
            self.monotonicity_pass = other.monotonicity_pass
            self.sizes, self.runtimes_ns = other.sizes, other.runtimes_ns
        if other.seed_robustness_pass is not None:
            self.seed_robustness_pass = other.seed_robustness_pass
            self.seed_verdicts = other.seed_verdicts
        self.notes += other.notes
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


@dataclass(frozen=True)
class QaConfig:
    n: int | None = None
    n_max: int = 10**7
    repeats: int = 5
    slack: float = MONOTONICITY_SLACK
    min_growth: float = MIN_GROWTH
    dev_instances: int = 5
    solver_seeds: tuple[int, ...] = (0, 1, 2)
    dev_seed_base: int = 0
    limits: RunLimits = field(default_factory=RunLimits)


def default_sizes(n: int, n_max: int = 10**7) -> list[int]:
    """Three-point geometric grid n/10, n, 10n clamped to [1, n_max]."""
    lo = max(1, n // 10)
    mid = min(max(n, lo + 1), n_max - 1)
    hi = min(max(10 * n, mid + 1), n_max)
    sizes = sorted({lo, mid, hi})
    if len(sizes) < 3:
        raise ValueError(f"cannot build three distinct sizes around n={n} within n_max={n_max}")
    return sizes


def check_runtime_monotonicity(
    task: TaskDefinition,
    sizes: Sequence[int],
    repeats: int = 5,
    limits: RunLimits | None = None,
    slack: float = MONOTONICITY_SLACK,
    min_growth: float = MIN_GROWTH,
) -> QaReport:
    """Pass iff per-size minimum runtimes never drop by more than ``slack`` of
    the previous size and the largest size is at least ``min_growth`` times
    slower than the smallest."""
    sizes = list(sizes)
    if len(sizes) < 3:
        raise ValueError("need at least three sizes")
    if any(b <= a for a, b in zip(sizes, sizes[1:])) or sizes[0] < 1:
        raise ValueError("sizes must be strictly ascending positive integers")
    report = QaReport(task.task_id, sizes=sizes)
    refs = [InstanceRef(task.task_id, n, 0, "dev") for n in sizes]
    records = run_suite(ReferenceSolver(task), task, refs, repeats=repeats, limits=limits)
    report.runtimes_ns = [r.min_ns for r in records]
    failed = [(r.instance.n, r.status, r.verdict.reason) for r in records if r.status != "ok"]
    if failed:
        report.monotonicity_pass = False
        report.notes += [f"reference failed at n={n}: {status} ({reason})" for n, status, reason in failed]
        return report
    times = report.runtimes_ns
    ok = True
    for (n0, t0), (n1, t1) in zip(zip(sizes, times), zip(sizes[1:], times[1:])):
        if t1 < (1.0 - slack) * t0:
            ok = False
            report.notes.append(f"runtime dropped from {t0} ns at n={n0} to {t1} ns at n={n1}")
    if times[-1] < min_growth * times[0]:
        ok = False
        report.notes.append(
            f"runtime does not grow with n: {times[0]} ns at n={sizes[0]} vs {times[-1]} ns at n={sizes[-1]}"
        )
    report.monotonicity_pass = ok
    return report


@contextmanager
def solver_seed(seed: int):
    old = os.environ.get(SOLVER_SEED_ENV)
    os.environ[SOLVER_SEED_ENV] = str(seed)
    try:
        yield
    finally:
        if old is None:
            os.environ.pop(SOLVER_SEED_ENV, None)
        else:
            os.environ[SOLVER_SEED_ENV] = old


def check_seed_robustness(
    task: TaskDefinition,
    instances: Sequence[ProblemInstance],
    solver_seeds: Sequence[int],
) -> QaReport:
    if len(solver_seeds) < 2:
        raise ValueError("need at least two solver seeds")
    if any(inst.split != "dev" for inst in instances):
        raise ValueError("seed-robustness instances must come from the dev split")
    report = QaReport(task.task_id)
    ok = True
    for inst in instances:
        for s in solver_seeds:
            with solver_seed(s):
                try:
                    solution = reference_solve(task, inst)
                except SolverError as exc:
                    report.seed_verdicts.append((inst.seed, s, False, str(exc)))
                    ok = False
                    continue
            verdict = verify(task, inst, solution)
            report.seed_verdicts.append((inst.seed, s, verdict.valid, verdict.reason))
            if not verdict.valid:
                ok = False
                report.notes.append(
                    f"verifier rejected reference output (instance seed {inst.seed}, solver seed {s}): {verdict.reason}"
                )
    report.seed_robustness_pass = ok
    return report


def qa_task(task: TaskDefinition, config: QaConfig | None = None) -> QaReport:
    config = config or QaConfig()
    n = config.n or task.default_n or 100
    report = QaReport(task.task_id)
    try:
        report.merge(check_runtime_monotonicity(task, default_sizes(n, config.n_max), config.repeats,
                                                config.limits, config.slack, config.min_growth))
    except Exception as exc:
        report.monotonicity_pass = False
        report.notes.append(f"monotonicity check errored: {type(exc).__name__}: {exc}")
    try:
        instances = [generate_problem(task, n, config.dev_seed_base + i, "dev") for i in range(config.dev_instances)]
        report.merge(check_seed_robustness(task, instances, config.solver_seeds))
    except Exception as exc:
        report.seed_robustness_pass = False
        report.notes.append(f"seed-robustness check errored: {type(exc).__name__}: {exc}")
    return report


def qa_bundle(registry: Registry, config: QaConfig | None = None,
              sizes: dict[str, int] | None = None) -> list[QaReport]:
    reports = []
    for task_id in registry:
        cfg = config or QaConfig()
        if sizes and task_id in sizes:
            cfg = replace(cfg, n=sizes[task_id])
        reports.append(qa_task(registry[task_id], cfg))
    return reports
