import math

import numpy as np
from scipy.stats import wasserstein_distance


class Task:
    task_id = "wasserstein_dist"
    category = "Statistics"
    default_n = 1000

    def generate_problem(self, n, random_seed):
        rng = np.random.default_rng(random_seed)
        u = rng.random(n)
        v = rng.random(n)
        return {"u": u / u.sum(), "v": v / v.sum()}

    def parse_input(self, value):
        if isinstance(value, dict):
            u, v = value["u"], value["v"]
        else:
            u, v = value
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if u.shape != v.shape or u.ndim != 1:
            raise ValueError("u and v must be 1-d weight vectors of equal length")
        return {"u": u, "v": v}

    def solve(self, problem):
        u = np.asarray(problem["u"], dtype=float)
        v = np.asarray(problem["v"], dtype=float)
        if u.shape != v.shape:
            raise ValueError(f"length mismatch: {u.shape} vs {v.shape}")
        domain = np.arange(1, u.shape[0] + 1)
        return float(wasserstein_distance(domain, domain, u, v))

    def is_solution(self, problem, solution):
        try:
            proposed = float(solution)
        except (TypeError, ValueError):
            return False
        if not math.isfinite(proposed) or proposed < 0:
            return False
        expected = self.solve(problem)
        return math.isclose(proposed, expected, rel_tol=1e-6, abs_tol=1e-9)
