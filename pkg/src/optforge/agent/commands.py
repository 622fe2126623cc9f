"""Parsing of model turns into a single command.

A turn is free-form reasoning plus exactly one fenced block (``` lines on
their own).  The block's first line names the command::

    edit                      delete
    file: solver.py           file: solver.py
    lines: 1-10               lines: 5-7
    ---
    <new content>
    ---

    ls | revert | eval
    view_file <file> [start_line]
    reference <input literal>          (alias: baseline)
    eval_input <input literal>
    profile <file.py> <input literal>
    profile_lines <file.py> <l1,l2,...> <input literal>
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

VERBS = ("edit", "delete", "ls", "view_file", "revert", "reference", "eval", "eval_input", "profile", "profile_lines")
ALIASES = {"baseline": "reference"}

_FENCE = re.compile(r"^\s*```[\w+-]*\s*$")
_LINES = re.compile(r"^\s*lines\s*:\s*(\d+)\s*-\s*(\d+)\s*$", re.IGNORECASE)
_FILE = re.compile(r"^\s*file\s*:\s*(.+?)\s*$", re.IGNORECASE)
_LINE_LIST = re.compile(r"^(\d+(?:\s*-\s*\d+)?(?:\s*,\s*\d+(?:\s*-\s*\d+)?)*)\s+(.+)$", re.DOTALL)

GRAMMAR_HELP = """Each message must contain a short thought followed by exactly one command
inside a single pair of ``` lines (each ``` on a line of its own). Commands:
  edit / delete (with "file: <name>" and "lines: <start>-<end>" lines; edit
    content goes between two --- lines), ls, view_file <file> [start_line],
  revert, reference <input>, eval, eval_input <input>,
  profile <file.py> <input>, profile_lines <file.py> <l1,l2,...> <input>."""


@dataclass
class Command:
    verb: str
    file: str | None = None
    start: int | None = None
    end: int | None = None
    body: list[str] = field(default_factory=list)
    input_text: str | None = None
    line_numbers: list[int] = field(default_factory=list)


@dataclass
class ParsedTurn:
    thought: str
    command: Command | None = None
    error: str | None = None


def _blocks(lines: list[str]) -> tuple[list[tuple[int, int]], bool]:
    fences = [i for i, line in enumerate(lines) if _FENCE.match(line)]
    # an edit body may legitimately contain fence-like lines; pair greedily
    pairs = []
    i = 0
    while i + 1 < len(fences):
        pairs.append((fences[i], fences[i + 1]))
        i += 2
    return pairs, len(fences) % 2 == 1


def parse_turn(raw: str) -> ParsedTurn:
    lines = raw.splitlines()
    pairs, dangling = _blocks(lines)
    if dangling and not pairs:
        return ParsedTurn(raw.strip(), error="Unclosed ``` block.\n\n" + GRAMMAR_HELP)
    if not pairs:
        return ParsedTurn(raw.strip(), error="No command found.\n\n" + GRAMMAR_HELP)
    if len(pairs) > 1:
        return ParsedTurn(raw.strip(), error=f"Found {len(pairs)} command blocks; send exactly one.\n\n" + GRAMMAR_HELP)
    (a, b), = pairs
    thought = "\n".join(lines[:a] + lines[b + 1:]).strip()
    try:
        command = parse_command(lines[a + 1:b])
    except ValueError as exc:
        return ParsedTurn(thought, error=f"{exc}\n\n{GRAMMAR_HELP}")
    return ParsedTurn(thought, command)


def parse_command(block: list[str]) -> Command:
    while block and not block[0].strip():
        block = block[1:]
    if not block:
        raise ValueError("Empty command block.")
    head = block[0].strip()
    verb, _, rest = head.partition(" ")
    verb = ALIASES.get(verb.lower(), verb.lower())
    rest = "\n".join([rest] + block[1:]).strip()
    if verb not in VERBS:
        raise ValueError(f"Unknown command {verb!r}.")
    if verb in ("edit", "delete"):
        # tolerate "edit file: x" written on the command line itself
        first = head[len(verb):].strip()
        return _parse_range_command(verb, ([first] if first else []) + block[1:])
    if verb in ("ls", "revert", "eval"):
        if rest:
            raise ValueError(f"{verb} takes no arguments.")
        return Command(verb)
    if verb == "view_file":
        parts = rest.split()
        if not parts or len(parts) > 2:
            raise ValueError("Usage: view_file <file_name> [start_line]")
        start = 1
        if len(parts) == 2:
            if not parts[1].isdigit() or int(parts[1]) < 1:
                raise ValueError("view_file start_line must be a positive integer.")
            start = int(parts[1])
        return Command(verb, file=parts[0], start=start)
    if verb in ("reference", "eval_input"):
        if not rest:
            raise ValueError(f"Usage: {verb} <input>")
        return Command(verb, input_text=rest)
    # profile / profile_lines
    filename, _, tail = rest.partition(" ")
    tail = tail.strip()
    if not filename or not tail:
        raise ValueError(f"Usage: {verb} <file.py> {'<lines> ' if verb == 'profile_lines' else ''}<input>")
    if verb == "profile":
        return Command(verb, file=filename, input_text=tail)
    m = _LINE_LIST.match(tail)
    if not m:
        raise ValueError("Usage: profile_lines <file.py> <l1,l2,...> <input>")
    return Command(verb, file=filename, line_numbers=_expand_lines(m.group(1)), input_text=m.group(2).strip())


def _expand_lines(spec: str) -> list[int]:
    out = []
    for part in spec.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = (int(x) for x in part.split("-"))
            out.extend(range(lo, hi + 1))
        else:
            out.append(int(part))
    return out


def _parse_range_command(verb: str, block: list[str]) -> Command:
    file = start = end = None
    body_start = None
    for i, line in enumerate(block):
        if line.strip() == "---":
            body_start = i
            break
        if not line.strip():
            continue
        if m := _FILE.match(line):
            file = m.group(1)
        elif m := _LINES.match(line):
            start, end = int(m.group(1)), int(m.group(2))
        else:
            raise ValueError(f"Unexpected line in {verb} command: {line.strip()!r}")
    if file is None:
        raise ValueError(f"{verb} needs a 'file: <file_name>' line.")
    if start is None:
        raise ValueError(f"{verb} needs a 'lines: <start>-<end>' line.")
    if verb == "delete":
        return Command(verb, file=file, start=start, end=end)
    if body_start is None:
        raise ValueError("edit content must be enclosed between two --- lines.")
    closers = [i for i in range(body_start + 1, len(block)) if block[i].strip() == "---"]
    if not closers:
        raise ValueError("edit content is missing its closing --- line.")
    body = block[body_start + 1:closers[-1]]
    return Command(verb, file=file, start=start, end=end, body=body)
