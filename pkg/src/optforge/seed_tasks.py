"""Desk-scale seed bundle shipped with the package.

The six tasks live under ``seed_bundle/`` in the standard bundle layout.  This
module adds convenience accessors and plain-function views of two reference
solvers that the tests exercise directly.
"""

from __future__ import annotations

import inspect
from functools import lru_cache
from pathlib import Path

import numpy as np

from .tasks import Registry, TaskDefinition, load_registry

SEED_BUNDLE_DIR = Path(__file__).resolve().parent / "seed_bundle"

SEED_TASK_IDS = (
    "wasserstein_dist",
    "psd_cone_projection",
    "count_connected_components",
    "unit_simplex_projection",
    "sha256_hashing",
    "gzip_compression",
)


@lru_cache(maxsize=1)
def seed_registry() -> Registry:
    return load_registry(SEED_BUNDLE_DIR)


def wasserstein_reference(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.ndim != 1:
        raise ValueError(f"u and v must be equal-length vectors, got {u.shape} and {v.shape}")
    return seed_registry()["wasserstein_dist"].reference_solver({"u": u, "v": v})


def psd_projection_reference(A) -> np.ndarray:
    return seed_registry()["psd_cone_projection"].reference_solver({"A": np.asarray(A, dtype=float)})


def reference_candidate_source(task: TaskDefinition) -> str:
    """Return a ``solver.py`` body that reproduces the reference solver.

    The plugin's module-level prelude (imports, constants, helpers) is kept and
    the ``Task.solve`` method is re-homed in a ``Solver`` class.
    """
    if task.plugin_path is None:
        raise ValueError(f"{task.task_id} has no plugin file")
    lines = task.plugin_path.read_text().splitlines()
    cls_line = next(i for i, line in enumerate(lines) if line.startswith("class Task"))
    prelude = "\n".join(lines[:cls_line]).rstrip()
    method = inspect.getsource(type(task.plugin).solve)
    return f"{prelude}\n\n\nclass Solver:\n{method}"


def write_reference_candidates(out_dir: Path | str, registry: Registry | None = None) -> list[Path]:
    """Lay out ``<out_dir>/<task_id>/solver.py`` reference copies for every task."""
    registry = registry if registry is not None else seed_registry()
    written = []
    for task_id in registry:
        ws = Path(out_dir) / task_id
        ws.mkdir(parents=True, exist_ok=True)
        (ws / "solver.py").write_text(reference_candidate_source(registry[task_id]))
        written.append(ws)
    return written
