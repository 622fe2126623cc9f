import gzip
import zlib

import numpy as np

# Pinned so the size bound is deterministic.
REFERENCE_LEVEL = 9
REFERENCE_MTIME = 0


class Task:
    task_id = "gzip_compression"
    category = "Misc."
    default_n = 32

    def generate_problem(self, n, random_seed):
        rng = np.random.default_rng(random_seed)
        vocab = [rng.bytes(int(k)) for k in rng.integers(2, 9, size=256)]
        weights = 1.0 / np.arange(1, len(vocab) + 1)
        picks = rng.choice(len(vocab), size=1024 * n // 4, p=weights / weights.sum())
        text = b" ".join(vocab[i] for i in picks)
        noise = rng.bytes(len(text) // 8)
        data = text + noise
        return {"plaintext": data[: 1024 * n]}

    def parse_input(self, value):
        data = value["plaintext"] if isinstance(value, dict) else value
        if isinstance(data, str):
            data = data.encode("utf-8")
        return {"plaintext": bytes(data)}

    def solve(self, problem):
        return gzip.compress(problem["plaintext"], compresslevel=REFERENCE_LEVEL, mtime=REFERENCE_MTIME)

    def is_solution(self, problem, solution):
        if not isinstance(solution, (bytes, bytearray)):
            return False
        plaintext = problem["plaintext"]
        try:
            restored = gzip.decompress(bytes(solution))
        except (OSError, EOFError, zlib.error):
            return False
        if restored != plaintext:
            return False
        bound = len(gzip.compress(plaintext, compresslevel=REFERENCE_LEVEL, mtime=REFERENCE_MTIME))
        return len(solution) <= bound
