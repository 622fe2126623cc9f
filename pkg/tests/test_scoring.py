import math

import pytest

from optforge.scoring import (
    BenchmarkReport,
    ScoringError,
    TaskScore,
    aggregate,
    budget_curve,
    harmonic_mean,
    score_task,
)
from optforge.tasks import InstanceRef, SolutionVerdict
from optforge.timing import TimingRecord


def rec(seed, ns, status="ok", task="t"):
    verdict = SolutionVerdict.ok() if status == "ok" else SolutionVerdict.reject(status)
    return TimingRecord(InstanceRef(task, 10, seed, "test"), [ns] if ns else [], ns, verdict, status)


def test_ratio_of_sums():
    ref = [rec(0, 100), rec(1, 300)]
    cand = [rec(0, 50), rec(1, 150)]
    s = score_task(ref, cand)
    assert s.raw_speedup == 2.0 and s.recorded_speedup == 2.0 and s.sped_up


def test_mean_of_ratios_differs():
    ref = [rec(0, 100), rec(1, 100)]
    cand = [rec(0, 10), rec(1, 100)]
    assert score_task(ref, cand).raw_speedup == pytest.approx(200 / 110)
    assert score_task(ref, cand, mode="mean_of_ratios").raw_speedup == pytest.approx(5.5)
    with pytest.raises(ScoringError):
        score_task(ref, cand, mode="median")


def test_mercy_floor_for_slow_candidate():
    s = score_task([rec(0, 100)], [rec(0, 300)])
    assert s.raw_speedup == pytest.approx(1 / 3)
    assert s.recorded_speedup == 1.0
    assert not s.sped_up


@pytest.mark.parametrize("status", ["invalid", "timeout", "crash", "oom"])
def test_any_failure_collapses_to_one(status):
    ref = [rec(0, 100), rec(1, 100)]
    cand = [rec(0, 1), rec(1, None, status)]
    s = score_task(ref, cand)
    assert s.raw_speedup is None
    assert s.recorded_speedup == 1.0
    assert s.valid_fraction == 0.5
    assert s.timeout_fraction == (0.5 if status == "timeout" else 0.0)


def test_threshold_is_inclusive():
    assert score_task([rec(0, 110)], [rec(0, 100)]).sped_up
    assert not score_task([rec(0, 109)], [rec(0, 100)]).sped_up


def test_mismatched_instance_sets():
    with pytest.raises(ScoringError):
        score_task([rec(0, 1), rec(1, 1)], [rec(0, 1), rec(2, 1)])
    with pytest.raises(ScoringError):
        score_task([rec(0, 1)], [rec(0, 1), rec(0, 1)])
    with pytest.raises(ScoringError):
        score_task([], [])


def test_reference_failure_is_an_error():
    with pytest.raises(ScoringError):
        score_task([rec(0, None, "crash")], [rec(0, 5)])


def test_harmonic_mean():
    assert harmonic_mean([1, 4, 4]) == pytest.approx(2.0)
    assert harmonic_mean([2.5]) == 2.5
    with pytest.raises(ScoringError):
        harmonic_mean([])
    with pytest.raises(ScoringError):
        harmonic_mean([1.0, 0.0])


def test_aggregate_and_roundtrip():
    scores = [score_task([rec(0, 300, task=t)], [rec(0, 100, task=t)]) for t in ("a", "b")]
    scores.append(score_task([rec(0, 100, task="c")], [rec(0, 100, task="c")]))
    report = aggregate(scores, {"backend": "x"})
    assert report.aggregate_score == pytest.approx(3 / (1 / 3 + 1 / 3 + 1))
    assert report.sped_up_pct == pytest.approx(200 / 3)
    again = BenchmarkReport.from_dict(report.to_dict())
    assert again == report
    assert TaskScore.from_dict(scores[0].to_dict()) == scores[0]
    with pytest.raises(ScoringError):
        aggregate([])


def test_budget_curve():
    events = [
        {"event": "start", "task_id": "a", "spent": 0.0},
        {"event": "snapshot", "task_id": "a", "spent": 0.2, "dev_speedup": 0.8},
        {"event": "snapshot", "task_id": "a", "spent": 0.5, "dev_speedup": 4.0},
        {"event": "start", "task_id": "b", "spent": 0.0},
        {"event": "snapshot", "task_id": "b", "spent": 0.3, "dev_speedup": 2.0},
    ]
    curve = budget_curve(events, [0.0, 0.25, 0.4, 1.0])
    assert curve[0] == (0.0, 1.0)
    assert curve[1] == (0.25, 1.0)
    assert curve[2][1] == pytest.approx(2 / (1 + 0.5))
    assert curve[3][1] == pytest.approx(2 / (0.25 + 0.5))
    assert budget_curve([], [0.5]) == [(0.5, 1.0)]
    with pytest.raises(ValueError):
        budget_curve(events, [1.0, 0.5])


def test_curve_is_monotone():
    events = [{"event": "snapshot", "task_id": "a", "spent": s, "dev_speedup": v}
              for s, v in [(0.1, 2.0), (0.2, 1.5), (0.3, 3.0)]]
    values = [v for _, v in budget_curve(events, [i / 10 for i in range(11)])]
    assert all(b >= a for a, b in zip(values, values[1:]))
    assert math.isclose(values[-1], 3.0)
