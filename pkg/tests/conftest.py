import textwrap
from pathlib import Path

import pytest

from optforge.seed_tasks import seed_registry
from optforge.tasks import load_registry, load_task

DESCRIPTION = """A synthetic task used by the test suite.

Example input:
5

Example output:
5
"""

# linear-time task whose only valid answer is the sum
SUM_TASK = '''
class Task:
    default_n = 200

    def generate_problem(self, n, random_seed):
        import random
        rng = random.Random(random_seed)
        return [rng.randint(0, 9) for _ in range(n)]

    def solve(self, problem):
        return sum(problem)

    def is_solution(self, problem, solution):
        return solution == sum(problem)
'''

# runtime independent of n
CONSTANT_TASK = '''
class Task:
    default_n = 1000

    def generate_problem(self, n, random_seed):
        return {"n": n, "seed": random_seed}

    def solve(self, problem):
        return 42

    def is_solution(self, problem, solution):
        return solution == 42
'''

# two valid answers (+root, -root); the reference picks one by solver seed,
# the verifier only accepts the positive one
EQUALITY_ONLY_TASK = '''
import math
import os


class Task:
    default_n = 20000

    def generate_problem(self, n, random_seed):
        return {"values": [float(random_seed + i + 1) for i in range(n)]}

    def solve(self, problem):
        sign = -1.0 if int(os.environ.get("OPTFORGE_SOLVER_SEED", "0")) % 2 else 1.0
        return [sign * math.sqrt(x) for x in problem["values"]]

    def is_solution(self, problem, solution):
        return solution == [math.sqrt(x) for x in problem["values"]]
'''

# deterministic CPU spin proportional to n
SPIN_TASK = '''
class Task:
    default_n = 20000

    def generate_problem(self, n, random_seed):
        return n

    def solve(self, problem):
        acc = 0
        for i in range(problem):
            acc = (acc * 31 + i) % 1000003
        return acc

    def is_solution(self, problem, solution):
        return solution == self.solve(problem)
'''

# wall time of n microseconds
SLEEP_TASK = '''
import time


class Task:
    default_n = 1000

    def generate_problem(self, n, random_seed):
        return n

    def solve(self, problem):
        time.sleep(problem * 1e-6)
        return problem

    def is_solution(self, problem, solution):
        return solution == problem
'''


def write_task(bundle: Path, name: str, source: str, description: str = DESCRIPTION) -> Path:
    d = Path(bundle) / name
    d.mkdir(parents=True, exist_ok=True)
    (d / "description.txt").write_text(description)
    (d / "task.py").write_text(textwrap.dedent(source).lstrip())
    return d


def write_workspace(ws: Path, source: str) -> Path:
    ws = Path(ws)
    ws.mkdir(parents=True, exist_ok=True)
    (ws / "solver.py").write_text(textwrap.dedent(source).lstrip())
    return ws


@pytest.fixture(scope="session")
def seeds():
    return seed_registry()


@pytest.fixture
def make_task(tmp_path):
    """Write a synthetic task under a fresh bundle and load it."""
    counter = {"i": 0}

    def make(source: str, name: str | None = None, description: str = DESCRIPTION):
        counter["i"] += 1
        name = name or f"synthetic_{counter['i']}"
        return load_task(write_task(tmp_path / "bundle", name, source, description))

    return make


@pytest.fixture
def sum_task(make_task):
    return make_task(SUM_TASK, "sum_task")


@pytest.fixture
def bundle_of(tmp_path):
    def make(**sources):
        root = tmp_path / "bundle_multi"
        for name, src in sources.items():
            write_task(root, name, src)
        return load_registry(root)

    return make


# acceptance criteria report one line each in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
