import numpy as np


class Task:
    task_id = "unit_simplex_projection"
    category = "Convex Optimization"
    default_n = 2000

    def generate_problem(self, n, random_seed):
        rng = np.random.default_rng(random_seed)
        return {"y": rng.standard_normal(n)}

    def parse_input(self, value):
        y = value["y"] if isinstance(value, dict) else value
        return {"y": np.asarray(y, dtype=float)}

    def solve(self, problem):
        y = np.asarray(problem["y"], dtype=float).ravel()
        u = np.sort(y)[::-1]
        cssv = np.cumsum(u) - 1.0
        ind = np.arange(1, y.size + 1)
        rho = np.nonzero(u - cssv / ind > 0)[0][-1]
        theta = cssv[rho] / (rho + 1.0)
        return np.maximum(y - theta, 0.0)

    def is_solution(self, problem, solution):
        y = np.asarray(problem["y"], dtype=float).ravel()
        try:
            x = np.asarray(solution, dtype=float).ravel()
        except (TypeError, ValueError):
            return False
        if x.shape != y.shape or not np.all(np.isfinite(x)):
            return False
        if np.any(x < -1e-10) or abs(float(x.sum()) - 1.0) > 1e-6:
            return False
        reference = self.solve(problem)
        obj = 0.5 * float(np.sum((x - y) ** 2))
        best = 0.5 * float(np.sum((reference - y) ** 2))
        return obj <= best + 1e-6 * max(1.0, best)
