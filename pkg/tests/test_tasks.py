import pytest

from optforge.tasks import (
    BundleError,
    GenerationError,
    InstanceRef,
    SolutionVerdict,
    SolverError,
    SplitPlan,
    generate_problem,
    load_registry,
    load_task,
    materialize,
    reference_solve,
    structural_dump,
    verify,
)

from conftest import DESCRIPTION, SUM_TASK, write_task


def test_generation_is_deterministic(sum_task):
    a = generate_problem(sum_task, 50, 7)
    b = generate_problem(sum_task, 50, 7)
    c = generate_problem(sum_task, 50, 8)
    assert a.payload == b.payload
    assert a.payload != c.payload
    assert (a.task_id, a.n, a.seed, a.split) == ("sum_task", 50, 7, "dev")


def test_generation_rejects_bad_n(sum_task):
    with pytest.raises(GenerationError):
        generate_problem(sum_task, 0, 1)
    with pytest.raises(ValueError):
        generate_problem(sum_task, 10, 1, split="train")


def test_generator_failure_is_wrapped(make_task):
    task = make_task(SUM_TASK.replace("rng = random.Random(random_seed)", "raise RuntimeError('boom')"))
    with pytest.raises(GenerationError, match="boom"):
        generate_problem(task, 5, 0)


def test_reference_solution_verifies(sum_task):
    inst = generate_problem(sum_task, 30, 3)
    sol = reference_solve(sum_task, inst)
    assert verify(sum_task, inst, sol) == SolutionVerdict(True, None)


def test_wrong_solution_rejected_with_reason(sum_task):
    inst = generate_problem(sum_task, 30, 3)
    verdict = verify(sum_task, inst, -1)
    assert not verdict.valid and verdict.reason


def test_verifier_exception_becomes_rejection(sum_task):
    inst = generate_problem(sum_task, 5, 0)
    verdict = verify(sum_task, inst, object())
    assert verdict.valid is False
    verdict = verify(sum_task, inst, [1, 2])
    assert verdict.valid is False


def test_verifier_cannot_mutate_instance(make_task):
    task = make_task(SUM_TASK.replace("return solution == sum(problem)",
                                      "problem.clear()\n        return True"))
    inst = generate_problem(task, 5, 1)
    before = list(inst.payload)
    verify(task, inst, 0)
    assert inst.payload == before


def test_reference_failure_carries_traceback(make_task):
    task = make_task(SUM_TASK.replace("return sum(problem)", "return 1 / 0"))
    with pytest.raises(SolverError) as info:
        reference_solve(task, generate_problem(task, 3, 0))
    assert "ZeroDivisionError" in info.value.traceback_text


def test_verdict_invariant():
    with pytest.raises(ValueError):
        SolutionVerdict(False, None)
    with pytest.raises(ValueError):
        SolutionVerdict(True, "why")


def test_materialize_roundtrip(sum_task):
    ref = InstanceRef("sum_task", 12, 4, "test")
    assert InstanceRef.from_dict(ref.to_dict()) == ref
    inst = materialize(sum_task, ref)
    assert inst.ref == ref
    assert inst.payload == generate_problem(sum_task, 12, 4, "test").payload


def test_split_plan_disjoint():
    plan = SplitPlan()
    dev = {r.seed for r in plan.dev("t", 10)}
    test = {r.seed for r in plan.test("t", 10)}
    assert len(dev) == len(test) == 100
    assert not dev & test


def test_registry_loads_and_is_sorted(tmp_path):
    write_task(tmp_path, "b_task", SUM_TASK)
    write_task(tmp_path, "a_task", SUM_TASK)
    (tmp_path / "_scratch").mkdir()
    reg = load_registry(tmp_path)
    assert list(reg) == ["a_task", "b_task"]
    assert reg["a_task"].default_n == 200
    with pytest.raises(TypeError):
        reg["c"] = None
    assert list(reg.select(["b_task"])) == ["b_task"]


def test_empty_bundle_is_empty_registry(tmp_path):
    assert len(load_registry(tmp_path)) == 0


def test_duplicate_task_id_rejected(tmp_path):
    src = SUM_TASK.replace("class Task:", "class Task:\n    task_id = 'same'")
    write_task(tmp_path, "one", src)
    write_task(tmp_path, "two", src)
    with pytest.raises(BundleError, match="duplicate"):
        load_registry(tmp_path)


@pytest.mark.parametrize("mutate, message", [
    (lambda d: (d / "description.txt").unlink(), "description"),
    (lambda d: (d / "task.py").write_text("class Task:\n    pass\n"), "generate_problem"),
    (lambda d: (d / "task.py").write_text("import not_a_module_xyz\n"), "failed to import"),
    (lambda d: (d / "description.txt").write_text("no examples here"), "example"),
])
def test_malformed_bundles(tmp_path, mutate, message):
    d = write_task(tmp_path, "bad", SUM_TASK)
    mutate(d)
    with pytest.raises(BundleError, match=message):
        load_task(d)


def test_invalid_task_id(tmp_path):
    d = write_task(tmp_path, "Bad-Name", SUM_TASK)
    with pytest.raises(BundleError, match="invalid task_id"):
        load_task(d)


def test_parse_input_and_sources(sum_task):
    assert sum_task.parse_input(" [1, 2, 3] ") == [1, 2, 3]
    with pytest.raises((ValueError, SyntaxError)):
        sum_task.parse_input("__import__('os')")
    assert "def solve" in sum_task.solver_source()
    assert "def is_solution" in sum_task.verifier_source()
    assert "Example input" in DESCRIPTION


def test_structural_dump():
    import numpy as np

    assert structural_dump({"a": np.arange(3), "b": (1, 2.5)}) == {"a": [0, 1, 2], "b": [1, 2.5]}
    assert structural_dump(b"\x01") == {"bytes_hex": "01"}
