import numpy as np


class Task:
    task_id = "psd_cone_projection"
    category = "Matrix Operations"
    default_n = 60

    def generate_problem(self, n, random_seed):
        rng = np.random.default_rng(random_seed)
        a = rng.standard_normal((n, n))
        return {"A": (a + a.T) / 2.0}

    def parse_input(self, value):
        a = np.asarray(value["A"] if isinstance(value, dict) else value, dtype=float)
        return {"A": a}

    def solve(self, problem):
        A = np.asarray(problem["A"], dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {A.shape}")
        if not np.allclose(A, A.T, rtol=1e-8, atol=1e-10):
            raise ValueError("matrix is not symmetric")
        eigvals, eigvecs = np.linalg.eigh(A)
        eigvals = np.maximum(eigvals, 0)
        X = eigvecs @ np.diag(eigvals) @ eigvecs.T
        return X

    def is_solution(self, problem, solution):
        A = np.asarray(problem["A"], dtype=float)
        try:
            X = np.asarray(solution, dtype=float)
        except (TypeError, ValueError):
            return False
        if X.shape != A.shape or not np.all(np.isfinite(X)):
            return False
        expected = self.solve(problem)
        scale = max(1.0, float(np.linalg.norm(expected)))
        return float(np.linalg.norm(X - expected)) <= 1e-8 * scale
