import hashlib

import numpy as np


class Task:
    task_id = "sha256_hashing"
    category = "Cryptography"
    default_n = 256

    def generate_problem(self, n, random_seed):
        rng = np.random.default_rng(random_seed)
        return {"plaintext": rng.bytes(1024 * n)}

    def parse_input(self, value):
        data = value["plaintext"] if isinstance(value, dict) else value
        if isinstance(data, str):
            data = data.encode("utf-8")
        return {"plaintext": bytes(data)}

    def solve(self, problem):
        return hashlib.sha256(problem["plaintext"]).digest()

    def is_solution(self, problem, solution):
        if not isinstance(solution, (bytes, bytearray)):
            return False
        return bytes(solution) == hashlib.sha256(problem["plaintext"]).digest()
