"""Task contract, on-disk bundle layout, and plugin registry.

A bundle is a directory with one subdirectory per task.  Each task directory
holds ``description.txt`` and ``task.py``; the plugin module defines a class
named ``Task`` with three methods::

    generate_problem(self, n, random_seed) -> payload
    solve(self, problem) -> solution
    is_solution(self, problem, solution) -> bool

Optional class attributes: ``task_id`` (defaults to the directory name),
``category``, ``default_n``.  Optional methods: ``parse_input(value)`` to
coerce a parsed literal into a payload, and ``serialize(solution)`` for the
results log.
"""

from __future__ import annotations

import ast
import copy
import importlib.util
import inspect
import re
import sys
import textwrap
import traceback
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType, ModuleType
from typing import Any, Iterator, Mapping

TASK_ID_RE = re.compile(r"^[a-z0-9_]+$")
DESCRIPTION_FILE = "description.txt"
PLUGIN_FILE = "task.py"
SPLITS = ("dev", "test")

# Solvers that use randomness read their seed from here (see task QA).
SOLVER_SEED_ENV = "OPTFORGE_SOLVER_SEED"

_EXAMPLE_INPUT_RE = re.compile(r"example\s+input", re.IGNORECASE)
_EXAMPLE_OUTPUT_RE = re.compile(r"example\s+output", re.IGNORECASE)


class TaskError(Exception):
    """Base class for task-contract failures."""


class GenerationError(TaskError):
    def __init__(self, task_id: str, n: int, seed: int, detail: str = ""):
        self.task_id = task_id
        self.n = n
        self.seed = seed
        self.detail = detail
        msg = f"cannot generate {task_id!r} instance (n={n}, seed={seed})"
        super().__init__(f"{msg}: {detail}" if detail else msg)


class SolverError(TaskError):
    """Reference solver raised; ``traceback_text`` is kept verbatim."""

    def __init__(self, task_id: str, traceback_text: str):
        self.task_id = task_id
        self.traceback_text = traceback_text
        last = traceback_text.strip().splitlines()[-1] if traceback_text.strip() else ""
        super().__init__(f"reference solver for {task_id!r} failed: {last}")


class BundleError(TaskError):
    def __init__(self, path: Path | str, detail: str):
        self.path = Path(path)
        super().__init__(f"{self.path.name}: {detail}")


@dataclass(frozen=True)
class InstanceRef:
    """Identity of a generated instance; the payload is recoverable from it."""

    task_id: str
    n: int
    seed: int
    split: str = "dev"

    def to_dict(self) -> dict:
        return {"task_id": self.task_id, "n": self.n, "seed": self.seed, "split": self.split}

    @classmethod
    def from_dict(cls, d: Mapping) -> "InstanceRef":
        return cls(d["task_id"], int(d["n"]), int(d["seed"]), d.get("split", "dev"))


@dataclass
class ProblemInstance:
    task_id: str
    n: int
    seed: int
    split: str
    payload: Any

    @property
    def ref(self) -> InstanceRef:
        return InstanceRef(self.task_id, self.n, self.seed, self.split)


@dataclass(frozen=True)
class SolutionVerdict:
    valid: bool
    reason: str | None = None

    def __post_init__(self):
        if self.valid and self.reason is not None:
            raise ValueError("a valid verdict carries no reason")
        if not self.valid and not self.reason:
            raise ValueError("an invalid verdict needs a reason")

    @classmethod
    def ok(cls) -> "SolutionVerdict":
        return cls(True)

    @classmethod
    def reject(cls, reason: str) -> "SolutionVerdict":
        return cls(False, reason)

    def to_dict(self) -> dict:
        return {"valid": self.valid, "reason": self.reason}


@dataclass
class TaskDefinition:
    task_id: str
    description: str
    category: str
    plugin: Any
    source_dir: Path | None = None
    default_n: int | None = None

    @property
    def plugin_path(self) -> Path | None:
        return self.source_dir / PLUGIN_FILE if self.source_dir else None

    # capabilities -------------------------------------------------------
    def generator(self, n: int, seed: int) -> Any:
        return self.plugin.generate_problem(n, seed)

    def reference_solver(self, problem: Any) -> Any:
        return self.plugin.solve(problem)

    def verifier(self, problem: Any, solution: Any) -> bool:
        return self.plugin.is_solution(problem, solution)

    def parse_input(self, text: str) -> Any:
        """Parse an input literal (Python literal syntax) into a payload."""
        value = ast.literal_eval(text.strip())
        hook = getattr(self.plugin, "parse_input", None)
        return hook(value) if hook is not None else value

    def serialize(self, solution: Any) -> Any:
        hook = getattr(self.plugin, "serialize", None)
        if hook is not None:
            return hook(solution)
        return structural_dump(solution)

    def solver_source(self) -> str:
        return _method_source(self.plugin, "solve")

    def verifier_source(self) -> str:
        return _method_source(self.plugin, "is_solution")


def _method_source(plugin: Any, name: str) -> str:
    try:
        return textwrap.dedent(inspect.getsource(getattr(type(plugin), name)))
    except (OSError, TypeError, AttributeError):
        return f"# source for {name} unavailable\n"


def structural_dump(value: Any) -> Any:
    """Best-effort JSON-compatible rendering of a solution."""
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    if isinstance(value, (bytes, bytearray)):
        return {"bytes_hex": bytes(value).hex()}
    if isinstance(value, Mapping):
        return {str(k): structural_dump(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [structural_dump(v) for v in value]
    tolist = getattr(value, "tolist", None)
    if callable(tolist):
        return structural_dump(tolist())
    if isinstance(value, complex):
        return [value.real, value.imag]
    return repr(value)


# operations -------------------------------------------------------------

def generate_problem(task: TaskDefinition, n: int, seed: int, split: str = "dev") -> ProblemInstance:
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise GenerationError(task.task_id, n, seed, "n must be a positive integer")
    if split not in SPLITS:
        raise ValueError(f"unknown split {split!r}")
    try:
        payload = task.generator(n, seed)
    except Exception as exc:  # task-specific failure
        raise GenerationError(task.task_id, n, seed, f"{type(exc).__name__}: {exc}") from exc
    return ProblemInstance(task.task_id, n, seed, split, payload)


def materialize(task: TaskDefinition, ref: InstanceRef) -> ProblemInstance:
    return generate_problem(task, ref.n, ref.seed, ref.split)


def reference_solve(task: TaskDefinition, instance: ProblemInstance) -> Any:
    if instance.task_id != task.task_id:
        raise ValueError(f"instance belongs to {instance.task_id!r}, not {task.task_id!r}")
    try:
        return task.reference_solver(instance.payload)
    except Exception:
        raise SolverError(task.task_id, traceback.format_exc()) from None


def verify(task: TaskDefinition, instance: ProblemInstance, proposed: Any) -> SolutionVerdict:
    """Run the task verifier; never raises for a bad ``proposed`` value."""
    if instance.task_id != task.task_id:
        raise ValueError(f"instance belongs to {instance.task_id!r}, not {task.task_id!r}")
    try:
        problem = copy.deepcopy(instance.payload)
        candidate = copy.deepcopy(proposed)
    except Exception:
        problem, candidate = instance.payload, proposed
    try:
        accepted = task.verifier(problem, candidate)
    except Exception as exc:
        return SolutionVerdict.reject(f"verifier raised: {type(exc).__name__}: {exc}")
    try:
        accepted = bool(accepted)
    except Exception:
        return SolutionVerdict.reject("verifier raised: non-boolean verdict")
    return SolutionVerdict.ok() if accepted else SolutionVerdict.reject("solution rejected by verifier")


# registry ---------------------------------------------------------------

class Registry(Mapping[str, TaskDefinition]):
    """Read-only mapping of task_id to TaskDefinition."""

    def __init__(self, tasks: Mapping[str, TaskDefinition], root: Path | None = None):
        self._tasks = MappingProxyType(dict(tasks))
        self.root = root

    def __getitem__(self, task_id: str) -> TaskDefinition:
        return self._tasks[task_id]

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self._tasks))

    def __len__(self) -> int:
        return len(self._tasks)

    def select(self, task_ids) -> "Registry":
        missing = [t for t in task_ids if t not in self._tasks]
        if missing:
            raise KeyError(f"unknown task id(s): {', '.join(missing)}")
        return Registry({t: self._tasks[t] for t in task_ids}, self.root)

    def __repr__(self) -> str:
        return f"Registry({list(self)})"


def load_plugin_module(path: Path, module_name: str | None = None) -> ModuleType:
    name = module_name or f"optforge_task_{path.parent.name}"
    spec = importlib.util.spec_from_file_location(name, path)
    if spec is None or spec.loader is None:
        raise ImportError(f"cannot import {path}")
    module = importlib.util.module_from_spec(spec)
    # inspect.getsource and pickle both want the module registered
    sys.modules[name] = module
    try:
        spec.loader.exec_module(module)
    except BaseException:
        sys.modules.pop(name, None)
        raise
    return module


def load_task(task_dir: Path) -> TaskDefinition:
    task_dir = Path(task_dir)
    desc_path = task_dir / DESCRIPTION_FILE
    plugin_path = task_dir / PLUGIN_FILE
    if not desc_path.is_file():
        raise BundleError(task_dir, f"missing {DESCRIPTION_FILE}")
    if not plugin_path.is_file():
        raise BundleError(task_dir, f"missing {PLUGIN_FILE}")
    description = desc_path.read_text(encoding="utf-8")
    if not description.strip():
        raise BundleError(task_dir, "empty description")
    if not (_EXAMPLE_INPUT_RE.search(description) and _EXAMPLE_OUTPUT_RE.search(description)):
        raise BundleError(task_dir, "description lacks an example input/output pair")
    try:
        module = load_plugin_module(plugin_path)
    except Exception as exc:
        raise BundleError(task_dir, f"plugin failed to import: {type(exc).__name__}: {exc}") from exc
    cls = getattr(module, "Task", None)
    if not inspect.isclass(cls):
        raise BundleError(task_dir, "plugin does not define a Task class")
    for method in ("generate_problem", "solve", "is_solution"):
        if not callable(getattr(cls, method, None)):
            raise BundleError(task_dir, f"Task class lacks {method}()")
    try:
        plugin = cls()
    except Exception as exc:
        raise BundleError(task_dir, f"Task() raised {type(exc).__name__}: {exc}") from exc
    task_id = getattr(cls, "task_id", None) or task_dir.name
    if not TASK_ID_RE.match(task_id):
        raise BundleError(task_dir, f"invalid task_id {task_id!r} (allowed: [a-z0-9_]+)")
    default_n = getattr(cls, "default_n", None)
    return TaskDefinition(
        task_id=task_id,
        description=description,
        category=getattr(cls, "category", "misc"),
        plugin=plugin,
        source_dir=task_dir.resolve(),
        default_n=int(default_n) if default_n else None,
    )


def load_registry(bundle_dir: Path | str) -> Registry:
    root = Path(bundle_dir)
    if not root.is_dir():
        raise BundleError(root, "bundle directory does not exist")
    tasks: dict[str, TaskDefinition] = {}
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        if sub.name.startswith((".", "_")):
            continue
        task = load_task(sub)
        if task.task_id in tasks:
            raise BundleError(sub, f"duplicate task_id {task.task_id!r}")
        tasks[task.task_id] = task
    return Registry(tasks, root.resolve())


def find_task_dir(registry: Registry, task_id: str) -> Path:
    task = registry[task_id]
    if task.source_dir is None:
        raise BundleError(task_id, "task was not loaded from disk")
    return task.source_dir


def instance_refs(task_id: str, n: int, split: str, count: int, seed_base: int) -> list[InstanceRef]:
    return [InstanceRef(task_id, n, seed_base + i, split) for i in range(count)]


@dataclass
class SplitPlan:
    """Seed layout for the dev and test splits."""

    dev_seed_base: int = 0
    test_seed_base: int = 1000
    dev_count: int = 100
    test_count: int = 100

    def dev(self, task_id: str, n: int) -> list[InstanceRef]:
        return instance_refs(task_id, n, "dev", self.dev_count, self.dev_seed_base)

    def test(self, task_id: str, n: int) -> list[InstanceRef]:
        return instance_refs(task_id, n, "test", self.test_count, self.test_seed_base)
