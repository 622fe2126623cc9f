import pytest

from optforge.qa import (
    QaConfig,
    check_runtime_monotonicity,
    check_seed_robustness,
    default_sizes,
    qa_bundle,
    qa_task,
    solver_seed,
)
from optforge.tasks import SOLVER_SEED_ENV, generate_problem

from conftest import CONSTANT_TASK, EQUALITY_ONLY_TASK, SPIN_TASK, SUM_TASK


def test_default_sizes():
    assert default_sizes(1000) == [100, 1000, 10000]
    assert default_sizes(5) == [1, 5, 50]
    assert default_sizes(10**7) == [10**6, 10**7 - 1, 10**7]
    with pytest.raises(ValueError):
        default_sizes(1, n_max=1)


def test_spin_task_is_monotone(make_task):
    task = make_task(SPIN_TASK, "spin")
    report = check_runtime_monotonicity(task, [2000, 20000, 200000], repeats=3)
    assert report.monotonicity_pass, report.notes
    assert report.runtimes_ns[2] > report.runtimes_ns[0]


def test_constant_task_fails(make_task):
    task = make_task(CONSTANT_TASK, "constant")
    report = check_runtime_monotonicity(task, [100, 1000, 10000], repeats=3)
    assert report.monotonicity_pass is False
    assert any("does not grow" in note or "dropped" in note for note in report.notes)


def test_monotonicity_requires_three_ascending_sizes(sum_task):
    with pytest.raises(ValueError):
        check_runtime_monotonicity(sum_task, [1, 2])
    with pytest.raises(ValueError):
        check_runtime_monotonicity(sum_task, [3, 2, 1])


def test_failing_reference_fails_monotonicity(make_task):
    task = make_task(SUM_TASK.replace("return sum(problem)", "raise ValueError('no')"), "broken")
    report = check_runtime_monotonicity(task, [10, 100, 1000], repeats=1)
    assert report.monotonicity_pass is False
    assert "reference failed" in report.notes[0]


def test_seed_robustness(make_task):
    good = make_task(SUM_TASK, "summer")
    insts = [generate_problem(good, 20, s) for s in range(3)]
    assert check_seed_robustness(good, insts, [0, 1, 2]).seed_robustness_pass

    picky = make_task(EQUALITY_ONLY_TASK, "picky")
    insts = [generate_problem(picky, 5, s) for s in range(2)]
    report = check_seed_robustness(picky, insts, [0, 1])
    assert report.seed_robustness_pass is False
    bad = [v for v in report.seed_verdicts if not v[2]]
    assert {v[1] for v in bad} == {1}


def test_seed_robustness_rejects_test_split(sum_task):
    with pytest.raises(ValueError):
        check_seed_robustness(sum_task, [generate_problem(sum_task, 5, 0, "test")], [0, 1])
    with pytest.raises(ValueError):
        check_seed_robustness(sum_task, [generate_problem(sum_task, 5, 0)], [0])


def test_solver_seed_restores_env(monkeypatch):
    monkeypatch.delenv(SOLVER_SEED_ENV, raising=False)
    import os

    with solver_seed(7):
        assert os.environ[SOLVER_SEED_ENV] == "7"
    assert SOLVER_SEED_ENV not in os.environ


def test_qa_task_combines(make_task):
    task = make_task(SPIN_TASK, "spin2")
    report = qa_task(task, QaConfig(n=20000, repeats=3, dev_instances=2, solver_seeds=(0, 1)))
    assert report.passed, report.notes
    assert report.to_dict()["passed"] is True


def test_qa_bundle_mixed(bundle_of):
    reg = bundle_of(spin=SPIN_TASK, constant=CONSTANT_TASK)
    reports = {r.task_id: r for r in qa_bundle(reg, QaConfig(repeats=3, dev_instances=2, solver_seeds=(0, 1)),
                                               sizes={"spin": 20000})}
    assert reports["spin"].passed
    assert not reports["constant"].passed
    assert reports["constant"].seed_robustness_pass
