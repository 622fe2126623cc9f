import networkx as nx
import numpy as np


class Task:
    task_id = "count_connected_components"
    category = "Graphs"
    default_n = 2000

    def generate_problem(self, n, random_seed):
        rng = np.random.default_rng(random_seed)
        m = n // 2
        if n < 2 or m == 0:
            return {"num_nodes": n, "edges": []}
        src = rng.integers(0, n, size=m)
        dst = rng.integers(0, n - 1, size=m)
        dst = np.where(dst >= src, dst + 1, dst)  # no self loops
        return {"num_nodes": n, "edges": list(zip(src.tolist(), dst.tolist()))}

    def parse_input(self, value):
        return {"num_nodes": int(value["num_nodes"]),
                "edges": [(int(a), int(b)) for a, b in value.get("edges", [])]}

    def solve(self, problem):
        G = nx.Graph()
        G.add_nodes_from(range(problem["num_nodes"]))
        G.add_edges_from(problem["edges"])
        return nx.number_connected_components(G)

    def is_solution(self, problem, solution):
        if isinstance(solution, bool):
            return False
        try:
            if int(solution) != solution:
                return False
        except (TypeError, ValueError, OverflowError):
            return False
        return int(solution) == self.solve(problem)
