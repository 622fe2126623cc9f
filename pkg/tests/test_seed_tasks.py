import gzip
import hashlib
import random

import numpy as np
import pytest

from optforge.qa import solver_seed
from optforge.seed_tasks import (
    SEED_TASK_IDS,
    psd_projection_reference,
    reference_candidate_source,
    wasserstein_reference,
)
from optforge.tasks import generate_problem, reference_solve, verify


def test_bundle_contents(seeds):
    assert sorted(seeds) == sorted(SEED_TASK_IDS)
    for task_id in seeds:
        task = seeds[task_id]
        assert task.default_n and task.default_n >= 1
        assert "Example input" in task.description and "Example output" in task.description


@pytest.mark.parametrize("task_id", SEED_TASK_IDS)
def test_reference_accepted_on_random_pairs(seeds, task_id):
    task = seeds[task_id]
    rng = random.Random(task_id)
    for _ in range(50):
        n = rng.randint(1, max(2, task.default_n // 4))
        inst = generate_problem(task, n, rng.randrange(10**6))
        with solver_seed(rng.randrange(100)):
            sol = reference_solve(task, inst)
        assert verify(task, inst, sol).valid, (task_id, n, inst.seed)


@pytest.mark.parametrize("task_id", SEED_TASK_IDS)
def test_description_example_input_parses(seeds, task_id):
    task = seeds[task_id]
    text = task.description.split("Example input:", 1)[1].split("Example output:", 1)[0]
    payload = task.parse_input(text)
    out = task.reference_solver(payload)
    assert out is not None


@pytest.mark.parametrize("u, v, expected", [
    ([0.2, 0.3, 0.5], [0.2, 0.3, 0.5], 0.0),
    ([1, 0], [0, 1], 1.0),
    ([0.5, 0.5], [0, 1], 0.5),
    ([1, 0, 0, 0], [0, 0, 0, 1], 3.0),
])
def test_wasserstein_examples(u, v, expected):
    assert wasserstein_reference(u, v) == pytest.approx(expected, abs=1e-12)


def test_wasserstein_length_mismatch():
    with pytest.raises(ValueError):
        wasserstein_reference([1.0], [0.5, 0.5])


def test_wasserstein_matches_cdf_recurrence():
    rng = np.random.default_rng(3)
    for n in (1, 2, 5, 40):
        u = rng.random(n)
        v = rng.random(n)
        u, v = u / u.sum(), v / v.sum()
        acc, total = 0.0, 0.0
        for i in range(n - 1):
            acc += u[i] - v[i]
            total += abs(acc)
        assert wasserstein_reference(u, v) == pytest.approx(total, rel=1e-9, abs=1e-12)


def test_wasserstein_verifier_tolerance(seeds):
    task = seeds["wasserstein_dist"]
    inst = generate_problem(task, 100, 1)
    d = reference_solve(task, inst)
    assert verify(task, inst, d * (1 + 1e-8)).valid
    assert not verify(task, inst, d * (1 + 1e-4)).valid


@pytest.mark.parametrize("A, X", [
    (np.eye(3), np.eye(3)),
    (np.diag([1.0, -1.0]), np.diag([1.0, 0.0])),
    (np.zeros((2, 2)), np.zeros((2, 2))),
    # eigenvalues 3 and -1 with eigenvectors (1,1)/sqrt2, (1,-1)/sqrt2
    (np.array([[1.0, 2.0], [2.0, 1.0]]), np.array([[1.5, 1.5], [1.5, 1.5]])),
])
def test_psd_projection_examples(A, X):
    np.testing.assert_allclose(psd_projection_reference(A), X, atol=1e-12)


def test_psd_rejects_non_symmetric():
    with pytest.raises(ValueError):
        psd_projection_reference([[0.0, 1.0], [0.0, 0.0]])


def test_psd_verifier_rejects_non_optimal(seeds):
    task = seeds["psd_cone_projection"]
    inst = generate_problem(task, 8, 2)
    X = reference_solve(task, inst)
    assert verify(task, inst, X).valid
    assert not verify(task, inst, X + 1e-3 * np.eye(8)).valid
    assert not verify(task, inst, X[:4, :4]).valid


def test_components_edgeless_graph(seeds):
    task = seeds["count_connected_components"]
    problem = {"num_nodes": 5, "edges": []}
    assert task.reference_solver(problem) == 5
    assert task.verifier(problem, 5)
    assert not task.verifier(problem, 4)


def test_simplex_projection_fixed_point(seeds):
    task = seeds["unit_simplex_projection"]
    y = np.array([0.1, 0.2, 0.3, 0.4])
    problem = task.parse_input(repr({"y": y.tolist()}))
    np.testing.assert_allclose(task.reference_solver(problem), y, atol=1e-12)


def test_simplex_projection_known_value(seeds):
    task = seeds["unit_simplex_projection"]
    # projection of (2, 0) onto the simplex is (1, 0); of (1, 1) is (0.5, 0.5)
    np.testing.assert_allclose(task.reference_solver({"y": np.array([2.0, 0.0])}), [1.0, 0.0])
    np.testing.assert_allclose(task.reference_solver({"y": np.array([1.0, 1.0])}), [0.5, 0.5])
    problem = {"y": np.array([1.0, 1.0])}
    assert not task.verifier(problem, np.array([1.0, 0.0]))
    assert not task.verifier(problem, np.array([0.6, 0.6]))


def test_sha256_equality(seeds):
    task = seeds["sha256_hashing"]
    inst = generate_problem(task, 2, 5)
    assert reference_solve(task, inst) == hashlib.sha256(inst.payload["plaintext"]).digest()
    assert not verify(task, inst, b"\x00" * 32).valid


def test_gzip_roundtrip_and_size_bound(seeds):
    task = seeds["gzip_compression"]
    inst = generate_problem(task, 4, 9)
    data = inst.payload["plaintext"]
    ref = reference_solve(task, inst)
    assert gzip.decompress(ref) == data
    assert verify(task, inst, ref).valid
    assert verify(task, inst, gzip.compress(data, compresslevel=9, mtime=0)).valid
    fast = gzip.compress(data, compresslevel=1, mtime=0)
    assert len(fast) > len(ref)
    assert not verify(task, inst, fast).valid
    assert not verify(task, inst, gzip.compress(data + b"x", mtime=0)).valid


def test_gzip_incompressible_bytes(seeds):
    task = seeds["gzip_compression"]
    data = np.random.default_rng(0).bytes(4096)
    problem = {"plaintext": data}
    ref = task.reference_solver(problem)
    assert task.verifier(problem, ref)
    assert task.verifier(problem, gzip.compress(data, compresslevel=9, mtime=0))


@pytest.mark.parametrize("task_id", SEED_TASK_IDS)
def test_reference_candidate_source_is_runnable(seeds, task_id, tmp_path):
    import importlib.util

    task = seeds[task_id]
    path = tmp_path / "solver.py"
    path.write_text(reference_candidate_source(task))
    spec = importlib.util.spec_from_file_location(f"cand_{task_id}", path)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    inst = generate_problem(task, 8, 0)
    assert verify(task, inst, mod.Solver().solve(inst.payload)).valid
