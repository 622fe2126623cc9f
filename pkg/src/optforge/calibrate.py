"""Pick the problem size whose reference runtime is closest to a target.

Two phases: a logarithmic sweep over ``[n_min, n_max]`` that stops at the
first size failing or exceeding the target after a success, then a bisection
between the last good size and that failure.  Each size is measured at most
once.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping

import numpy as np

from .tasks import InstanceRef, Registry, TaskDefinition
from .timing import ReferenceSolver, RunLimits, run_suite

log = logging.getLogger(__name__)

MiB = 1024 * 1024


@dataclass(frozen=True)
class GridParams:
    n_min: int = 1
    n_max: int = 10**7
    log_sweep: int = 16
    refine: int = 8
    m: int = 10
    seed: int = 1
    runs: int = 5
    warmups: int = 3
    mem_limit: int = 8192 * MiB

    def __post_init__(self):
        if self.n_min < 1 or self.n_max < self.n_min:
            raise ValueError(f"need 1 <= n_min <= n_max, got {self.n_min}..{self.n_max}")
        if self.log_sweep < 1 or self.refine < 0:
            raise ValueError("log_sweep must be >= 1 and refine >= 0")
        if self.m < 1 or self.runs < 1 or self.warmups < 0:
            raise ValueError("m and runs must be >= 1, warmups >= 0")


@dataclass
class Probe:
    n: int
    mean_s: float | None
    status: str = "ok"

    @property
    def succeeded(self) -> bool:
        return self.mean_s is not None


@dataclass
class CalibrationResult:
    task_id: str
    chosen_n: int | None
    target_time: float
    probe_log: list[Probe] = field(default_factory=list)
    grid_params: GridParams = field(default_factory=GridParams)
    note: str = ""

    @property
    def measurements(self) -> int:
        return len(self.probe_log)

    def chosen_mean(self) -> float | None:
        for p in self.probe_log:
            if p.n == self.chosen_n:
                return p.mean_s
        return None

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "chosen_n": self.chosen_n,
            "target_time": self.target_time,
            "probe_log": [asdict(p) for p in self.probe_log],
            "grid_params": asdict(self.grid_params),
            "note": self.note,
        }


def measure_mean_solve_time(
    task: TaskDefinition,
    n: int,
    m: int = 10,
    seed: int = 1,
    runs: int = 5,
    warmups: int = 3,
    timeout: float = 5.0,
    mem_limit: int | None = 8192 * MiB,
) -> Probe:
    """Mean over ``m`` instances of the per-instance minimum reference time.

    Instances use seeds ``seed .. seed+m-1``.  Each gets ``warmups`` untimed
    calls, then ``runs`` timed calls.  ``timeout`` bounds every single call.
    Any timeout, crash or memory failure yields a probe with ``mean_s=None``.
    """
    if m < 1 or runs < 1:
        raise ValueError("m and runs must be >= 1")
    if n < 1:
        raise ValueError("n must be >= 1")
    limits = RunLimits(mem_limit=mem_limit, fallback_timeout_s=timeout)
    refs = [InstanceRef(task.task_id, n, seed + i, "dev") for i in range(m)]
    records = run_suite(
        ReferenceSolver(task), task, refs, repeats=runs, limits=limits,
        warmups=warmups, per_repeat_warmup=False, verify_outputs=False,
    )
    for rec in records:
        if rec.status != "ok":
            return Probe(n, None, rec.status)
    return Probe(n, float(np.mean([rec.min_ns for rec in records])) / 1e9)


Measure = Callable[[int], "Probe | float | None"]


def _as_probe(n: int, value) -> Probe:
    if isinstance(value, Probe):
        return value
    if value is None:
        return Probe(n, None, "failed")
    return Probe(n, float(value))


def sweep_grid(params: GridParams) -> list[int]:
    points = np.geomspace(params.n_min, params.n_max, params.log_sweep)
    return sorted({params.n_min, *map(int, points), params.n_max})


def find_n_for_time(
    task: TaskDefinition | None,
    target_time: float,
    params: GridParams | None = None,
    measure: Measure | None = None,
) -> CalibrationResult:
    if target_time <= 0:
        raise ValueError("target_time must be positive")
    params = params or GridParams()
    task_id = task.task_id if task is not None else "<model>"
    if measure is None:
        if task is None:
            raise ValueError("need a task or a measure function")
        timeout = max(1.0, 50 * target_time)

        def measure(n):
            return measure_mean_solve_time(task, n, params.m, params.seed, params.runs,
                                           params.warmups, timeout, params.mem_limit)

    result = CalibrationResult(task_id, None, target_time, grid_params=params)
    cache: dict[int, Probe] = {}

    def probe(n: int) -> float | None:
        if n not in cache:
            if not params.n_min <= n <= params.n_max:
                raise AssertionError(f"probe {n} outside [{params.n_min}, {params.n_max}]")
            cache[n] = _as_probe(n, measure(n))
            result.probe_log.append(cache[n])
            log.debug("%s: n=%d -> %s", task_id, n, cache[n])
        return cache[n].mean_s

    best: tuple[int | None, float] = (None, float("inf"))
    low_ok = high_fail = None

    for n in sweep_grid(params):
        mean = probe(n)
        if mean is None or mean > target_time:
            if low_ok is not None:
                high_fail = n
                break
            continue
        low_ok = n
        err = abs(mean - target_time)
        if err < best[1]:
            best = (n, err)

    if best[0] is None:
        result.note = "no probed size finished under the target"
        return result

    for _ in range(params.refine):
        if high_fail is None or high_fail - low_ok <= 1:
            break
        mid = (low_ok + high_fail) // 2
        mean = probe(mid)
        if mean is None:
            high_fail = mid - 1
            continue
        err = abs(mean - target_time)
        if err < best[1]:
            best = (mid, err)
        if mean > target_time:
            high_fail = mid - 1
        else:
            low_ok = mid

    result.chosen_n = best[0]
    return result


def calibrate_bundle(
    registry: Registry,
    target_time: float = 0.1,
    params: GridParams | None = None,
    targets: Mapping[str, float] | None = None,
    measure_factory: Callable[[TaskDefinition], Measure] | None = None,
) -> list[CalibrationResult]:
    """Calibrate every task; a task's ``target_time`` attribute or ``targets``
    entry may lower its target."""
    if target_time <= 0:
        raise ValueError("target_time must be positive")
    results = []
    for task_id in registry:
        task = registry[task_id]
        target = (targets or {}).get(task_id) or getattr(task.plugin, "target_time", None) or target_time
        measure = measure_factory(task) if measure_factory else None
        try:
            results.append(find_n_for_time(task, target, params, measure))
        except Exception as exc:
            log.warning("calibration of %s failed: %s", task_id, exc)
            results.append(CalibrationResult(task_id, None, target, grid_params=params or GridParams(),
                                             note=f"{type(exc).__name__}: {exc}"))
    return results
