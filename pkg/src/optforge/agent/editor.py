"""Workspace file editing with a static-check gate.

Edits replace an inclusive line range; ``0-0`` prepends.  Python files are
checked with pyflakes after every edit and the edit is rolled back
byte-for-byte when a blocking problem is found.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from pyflakes import api as pyflakes_api
from pyflakes import messages as pyflakes_messages

VIEW_WINDOW = 50

# pyflakes findings that mean the code cannot run as written; style-level
# findings such as unused imports are not grounds for rejecting an edit
BLOCKING_MESSAGES = (
    pyflakes_messages.UndefinedName,
    pyflakes_messages.UndefinedLocal,
    pyflakes_messages.UndefinedExport,
    pyflakes_messages.DuplicateArgument,
    pyflakes_messages.ReturnOutsideFunction,
    pyflakes_messages.YieldOutsideFunction,
    pyflakes_messages.ContinueOutsideLoop,
    pyflakes_messages.BreakOutsideLoop,
    pyflakes_messages.TwoStarredExpressions,
    pyflakes_messages.TooManyExpressionsInStarredAssignment,
)


class EditRejected(ValueError):
    """The edit could not be applied (bad path, bad range)."""


def _code_name(cls_name: str) -> str:
    return re.sub(r"(?<!^)(?=[A-Z])", "-", cls_name).lower()


class _Collector:
    def __init__(self):
        self.errors: list[str] = []

    def unexpectedError(self, filename, msg):
        self.errors.append(f"Line 1: {msg} (unexpected-error)")

    def syntaxError(self, filename, msg, lineno, offset, text):
        self.errors.append(f"Line {lineno or 1}: {msg} (syntax-error)")

    def flake(self, message):
        if isinstance(message, BLOCKING_MESSAGES):
            text = message.message % message.message_args
            self.errors.append(f"Line {message.lineno}: {text} ({_code_name(type(message).__name__)})")


def lint_source(source: str, filename: str = "solver.py") -> list[str]:
    """Blocking static-check errors for ``source``; empty means clean."""
    collector = _Collector()
    pyflakes_api.check(source, filename, collector)
    return collector.errors


def resolve_in_workspace(workspace: Path, name: str) -> Path:
    if not name or name.strip() != name:
        raise EditRejected(f"invalid file name {name!r}")
    if Path(name).is_absolute():
        raise EditRejected(f"{name}: absolute paths are not allowed; use a path inside the workspace")
    root = workspace.resolve()
    target = (root / name).resolve()
    if target == root or root not in target.parents:
        raise EditRejected(f"{name}: path escapes the workspace")
    if "__pycache__" in target.relative_to(root).parts:
        raise EditRejected(f"{name}: cannot edit cache files")
    return target


def replace_lines(lines: list[str], start: int, end: int, body: list[str]) -> tuple[list[str], int]:
    """Return the new line list and the first modified line number."""
    if start == 0 and end == 0:
        return list(body) + lines, 1
    if start < 1 or end < 1:
        raise EditRejected(f"line numbers start at 1 (use 0-0 to prepend), got {start}-{end}")
    if end < start:
        raise EditRejected(f"end line {end} is before start line {start}")
    if start > len(lines) + 1:
        raise EditRejected(f"start line {start} is past the end of the file ({len(lines)} lines)")
    end = min(end, len(lines))
    return lines[:start - 1] + list(body) + lines[end:], start


def read_lines(path: Path) -> list[str]:
    if not path.exists():
        return []
    return path.read_text(encoding="utf-8", errors="replace").splitlines()


def numbered_view(name: str, lines: list[str], start: int = 1, window: int = VIEW_WINDOW,
                  modified: range | None = None) -> str:
    total = len(lines)
    if total == 0:
        return f"File {name} is empty."
    start = max(1, min(start, total))
    stop = min(total, start + window - 1)
    width = max(2, len(str(stop)))
    out = [f"Contents of {name} (lines {start}-{stop} out of {total})"]
    if modified is not None:
        out.append("(| = existing code, > = modified code)")
    out.append("")
    for i in range(start, stop + 1):
        mark = ">" if modified is not None and i in modified else "|"
        out.append(f"{mark} {i:0{width}d}: {lines[i - 1]}")
    if stop < total:
        out.append("...")
    return "\n".join(out)


@dataclass
class EditOutcome:
    applied: bool
    path: Path
    message: str
    lint_errors: list[str]


def apply_line_edit(workspace: Path, name: str, start: int, end: int, body: list[str]) -> EditOutcome:
    """Apply an edit and gate it on the static check; roll back on failure."""
    path = resolve_in_workspace(workspace, name)
    existed = path.exists()
    if existed and not path.is_file():
        raise EditRejected(f"{name} is not a regular file")
    before = path.read_bytes() if existed else None
    lines = read_lines(path)
    new_lines, first = replace_lines(lines, start, end, body)
    new_text = "\n".join(new_lines) + ("\n" if new_lines else "")
    errors = lint_source(new_text, name) if path.suffix == ".py" else []
    modified = range(first, first + len(body))
    if errors:
        proposed = numbered_view(name, new_lines, max(1, first - 10), modified=modified)
        current = numbered_view(name, lines, max(1, first - 10))
        msg = "\n".join([
            "Edit failed (and thus not applied) for " + name + ": static check found errors:",
            *errors, "", "Proposed changes (not applied):", proposed, "", "Current file:", current,
        ])
        return EditOutcome(False, path, msg, errors)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        path.write_text(new_text, encoding="utf-8")
    except OSError as exc:
        _restore(path, before)
        raise EditRejected(f"could not write {name}: {exc}") from exc
    view = numbered_view(name, new_lines, max(1, first - 10), modified=modified)
    return EditOutcome(True, path, f"Edit successful for {name}.\n\n{view}", [])


def _restore(path: Path, before: bytes | None) -> None:
    if before is None:
        path.unlink(missing_ok=True)
    else:
        path.write_bytes(before)


# snapshots -------------------------------------------------------------

def _tracked(path: Path) -> bool:
    return "__pycache__" not in path.parts and not path.name.endswith((".pyc", ".so", ".o"))


def snapshot_files(workspace: Path) -> dict[str, bytes]:
    root = workspace.resolve()
    files = {}
    for p in sorted(root.rglob("*")):
        rel = p.relative_to(root)
        if p.is_file() and _tracked(rel) and "build" not in rel.parts[:1]:
            files[rel.as_posix()] = p.read_bytes()
    return files


def restore_files(workspace: Path, files: dict[str, bytes]) -> None:
    """Make the tracked workspace contents exactly ``files``."""
    root = workspace.resolve()
    for rel in set(snapshot_files(root)) - set(files):
        (root / rel).unlink()
    for rel, data in files.items():
        target = root / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(data)


def list_files(workspace: Path) -> list[str]:
    return sorted(snapshot_files(workspace))
