"""Budgeted optimization loop: query a backend, run its command, reply.

The session keeps a ledger of spend, the message log, and the best code
snapshot seen on the development split.  When the budget runs out (or the
backend stops) the best snapshot is restored into the workspace as the
submission; with no snapshot the initial empty workspace is submitted.
"""

from __future__ import annotations

import logging
import re
import tempfile
import traceback
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from ..scoring import score_task
from ..tasks import InstanceRef, TaskDefinition, instance_refs, structural_dump
from ..timing import (
    BuildError,
    LiteralInstance,
    ReferenceSolver,
    RunLimits,
    TimingRecord,
    prepare_candidate,
    profile_solver,
    run_suite,
    time_solver_on_instance,
)
from .backends import BackendError, BackendStop
from .commands import Command, parse_turn
from .editor import (
    EditRejected,
    apply_line_edit,
    list_files,
    numbered_view,
    read_lines,
    resolve_in_workspace,
    restore_files,
    snapshot_files,
)
from .history import truncate_history
from .prompt import build_system_prompt

log = logging.getLogger(__name__)

SOLVER_FILE = "solver.py"
VIEW_LINES = 100
PROFILE_TOP = 25
OUTPUT_PREVIEW_CHARS = 2000

_HEADER_RE = re.compile(
    r"^You have so far sent (\d+) messages?, and used up \$(\d+(?:\.\d+)?)\. "
    r"You have \$(\d+(?:\.\d+)?) remaining\.$"
)


def format_budget_header(messages_sent: int, spent: float, remaining: float) -> str:
    noun = "message" if messages_sent == 1 else "messages"
    return (f"You have so far sent {messages_sent} {noun}, and used up ${spent:.4f}. "
            f"You have ${remaining:.4f} remaining.")


def parse_budget_header(line: str) -> tuple[int, float, float]:
    m = _HEADER_RE.match(line.strip())
    if not m:
        raise ValueError(f"not a budget header: {line!r}")
    return int(m.group(1)), float(m.group(2)), float(m.group(3))


@dataclass
class Feedback:
    header: str
    body: str
    snapshot_note: str | None = None

    @property
    def text(self) -> str:
        parts = [self.header, "", self.body]
        if self.snapshot_note:
            parts += ["", self.snapshot_note]
        return "\n".join(parts)


@dataclass(frozen=True)
class SessionConfig:
    n: int | None = None
    dev_count: int = 100
    dev_seed_base: int = 0
    repeats: int = 10
    limits: RunLimits = field(default_factory=RunLimits)
    token_limit: int = 128_000

    def __post_init__(self):
        if self.dev_count < 1 or self.repeats < 1:
            raise ValueError("dev_count and repeats must be >= 1")


@dataclass
class Snapshot:
    files: dict[str, bytes]
    dev_speedup: float
    spent: float


@dataclass
class AgentSession:
    task: TaskDefinition
    workspace: Path
    budget_total: float
    config: SessionConfig = field(default_factory=SessionConfig)
    budget_spent: float = 0.0
    messages_sent: int = 0
    message_log: list[dict] = field(default_factory=list)
    best_snapshot: Snapshot | None = None
    terminated: bool = False
    termination_reason: str | None = None
    events: list[dict] = field(default_factory=list)
    feedback_log: list[Feedback] = field(default_factory=list)
    initial_files: dict[str, bytes] = field(default_factory=dict)
    submission: dict[str, bytes] | None = None
    event_sink: Callable[[dict], None] | None = field(default=None, repr=False)
    _ref_records: list[TimingRecord] | None = field(default=None, repr=False)

    @classmethod
    def create(cls, task: TaskDefinition, workspace: Path | str, budget: float,
               config: SessionConfig | None = None, event_sink=None) -> "AgentSession":
        if not budget > 0:
            raise ValueError(f"budget must be positive, got {budget}")
        ws = Path(workspace)
        ws.mkdir(parents=True, exist_ok=True)
        solver = ws / SOLVER_FILE
        if not solver.exists():
            solver.write_text("")
        session = cls(task, ws, float(budget), config or SessionConfig(), event_sink=event_sink)
        session.initial_files = snapshot_files(ws)
        session.message_log.append(
            {"role": "system", "content": build_system_prompt(task, session.config.dev_count)})
        return session

    @property
    def task_id(self) -> str:
        return self.task.task_id

    @property
    def budget_remaining(self) -> float:
        return max(0.0, self.budget_total - self.budget_spent)

    @property
    def n(self) -> int:
        return self.config.n or self.task.default_n or 100

    def dev_refs(self) -> list[InstanceRef]:
        return instance_refs(self.task_id, self.n, "dev", self.config.dev_count, self.config.dev_seed_base)

    def header(self) -> str:
        return format_budget_header(self.messages_sent, self.budget_spent, self.budget_remaining)

    def feedback(self, body: str, note: str | None = None) -> Feedback:
        return Feedback(self.header(), body, note)

    def emit(self, event: str, **data) -> dict:
        record = {"event": event, "task_id": self.task_id, **data}
        self.events.append(record)
        if self.event_sink is not None:
            self.event_sink(record)
        return record

    def reference_records(self) -> list[TimingRecord]:
        if self._ref_records is None:
            refs = self.dev_refs()
            assert all(r.split == "dev" for r in refs)
            records = run_suite(ReferenceSolver(self.task), self.task, refs, self.config.repeats, self.config.limits)
            bad = [r for r in records if r.status != "ok"]
            if bad:
                raise RuntimeError(f"reference solver failed on dev input seed {bad[0].instance.seed}: "
                                   f"{bad[0].status} ({bad[0].verdict.reason})")
            self._ref_records = records
        return self._ref_records


# formatting helpers -----------------------------------------------------

def _preview(task: TaskDefinition, value) -> str:
    # shown through the task's own serializer, not canonicalized
    try:
        shown = task.serialize(value)
    except Exception:
        shown = structural_dump(value)
    text = repr(shown)
    if len(text) > OUTPUT_PREVIEW_CHARS:
        text = text[:OUTPUT_PREVIEW_CHARS] + f"... ({len(text)} characters in total)"
    return text


def _pct(x: float) -> str:
    return f"{100 * x:.0f}%"


def code_context(workspace: Path, error: dict | None, radius: int = 3) -> str:
    """Lines around the failing line of a workspace file, failing line marked."""
    if not error or not error.get("file") or not error.get("lineno"):
        return ""
    try:
        path = resolve_in_workspace(workspace, error["file"])
    except EditRejected:
        return ""
    if not path.is_file():
        return ""
    lines = read_lines(path)
    lineno = int(error["lineno"])
    lo, hi = max(1, lineno - radius), min(len(lines), lineno + radius)
    width = max(2, len(str(hi)))
    out = []
    for i in range(lo, hi + 1):
        mark = "!" if i == lineno else " "
        out.append(f"{mark} {i:0{width}d}: {lines[i - 1]}")
    return "\n".join(out)


def describe_failure(workspace: Path, record: TimingRecord) -> str:
    return describe_error(workspace, record.error, record.traceback, record.verdict.reason or record.status)


def describe_error(workspace: Path, err: dict | None, tb: str | None, fallback: str) -> str:
    if err:
        where = ""
        if err.get("file"):
            where = f"\n  in {err.get('function', '?')}, {err['file']} line {err.get('lineno')}"
        text = f"Error: {err.get('exc_type')}: {err.get('message')}{where}"
        ctx = code_context(workspace, err)
        if ctx:
            text += "\n\nCode Context:\n" + ctx
        return text
    if tb:
        return "Error:\n" + tb.strip()[-1500:]
    return f"Error: {fallback}"


# commands -----------------------------------------------------------------

def evaluate_dev(session: AgentSession) -> Feedback:
    body, note = _evaluate(session)
    return session.feedback(body, note)


def _evaluate(session: AgentSession) -> tuple[str, str | None]:
    cfg = session.config
    try:
        handle = prepare_candidate(session.workspace, cfg.limits, session.task)
    except BuildError as exc:
        session.emit("evaluation", spent=session.budget_spent, status="build_error", message=str(exc))
        text = f"Build failed: {exc}"
        if exc.output:
            text += "\n" + exc.output.strip()[-2000:]
        return text, None
    ref = session.reference_records()
    refs = [r.instance for r in ref]
    cand = run_suite(handle, session.task, refs, cfg.repeats, cfg.limits, [r.min_ns for r in ref])
    score = score_task(ref, cand, task_id=session.task_id)
    if score.raw_speedup is not None:
        speed = f"Speedup: {score.raw_speedup:.2f}x"
    else:
        speed = "Speedup: N/A (not every output was valid, so this counts as 1.00x)"
    lines = [
        f"Evaluation on {len(refs)} development inputs (n={session.n}):",
        speed,
        "  (Speedup = Baseline Time / Your Time; Higher is better)",
        "",
        f"  Valid Solutions: {_pct(score.valid_fraction)}",
        f"  Invalid Solutions: {_pct(score.invalid_fraction)}",
        f"  Timeouts: {_pct(score.timeout_fraction)}",
    ]
    failed = next((r for r in cand if r.status != "ok"), None)
    if failed is not None:
        lines += ["", f"First failure (dev input {failed.instance.seed}, status {failed.status}):"]
        if failed.status == "invalid":
            lines.append(f"Invalid output: {failed.verdict.reason}")
        else:
            lines.append(describe_failure(session.workspace, failed))
    session.emit("evaluation", spent=session.budget_spent, status="ok", raw_speedup=score.raw_speedup,
                 valid_fraction=score.valid_fraction, timeout_fraction=score.timeout_fraction)
    note = None
    best = session.best_snapshot
    if score.raw_speedup is not None and (best is None or score.raw_speedup > best.dev_speedup):
        session.best_snapshot = Snapshot(snapshot_files(session.workspace), score.raw_speedup, session.budget_spent)
        session.emit("snapshot", spent=session.budget_spent, dev_speedup=score.raw_speedup)
        note = "Snapshot saved (best speedup so far; the code state is saved)."
    return "\n".join(lines), note


def apply_edit(session: AgentSession, cmd: Command) -> Feedback:
    body, note = _edit(session, cmd)
    return session.feedback(body, note)


def _edit(session: AgentSession, cmd: Command) -> tuple[str, str | None]:
    body = cmd.body if cmd.verb == "edit" else []
    if cmd.verb == "delete" and cmd.start == 0:
        return "Edit rejected: delete needs a line range starting at 1.", None
    try:
        outcome = apply_line_edit(session.workspace, cmd.file, cmd.start, cmd.end, body)
    except EditRejected as exc:
        return f"Edit rejected: {exc}", None
    if not outcome.applied:
        session.emit("edit", spent=session.budget_spent, file=cmd.file, applied=False)
        return outcome.message, None
    session.emit("edit", spent=session.budget_spent, file=cmd.file, applied=True)
    if outcome.path.suffix != ".py":
        return outcome.message, None
    result, note = _evaluate(session)
    return outcome.message + "\n\n" + result, note


def _parse_literal(session: AgentSession, text: str):
    try:
        return session.task.parse_input(text), None
    except Exception as exc:
        return None, (f"Could not parse the input: {type(exc).__name__}: {exc}\n"
                      "Write inputs as Python literals shaped like the example input in the task description.")


def _reference_on(session: AgentSession, text: str, payload) -> TimingRecord:
    lit = LiteralInstance(session.task_id, text, payload)
    return time_solver_on_instance(ReferenceSolver(session.task), session.task, lit, repeats=3,
                                   limits=session.config.limits, keep_outputs=True, verify_outputs=False)


def _cmd_reference(session: AgentSession, cmd: Command) -> str:
    payload, err = _parse_literal(session, cmd.input_text)
    if err:
        return err
    rec = _reference_on(session, cmd.input_text, payload)
    if rec.status != "ok":
        return f"The reference solver failed on this input ({rec.status}).\n" + (rec.traceback or "")[-1500:]
    return f"Reference output:\n{_preview(session.task, rec.output)}\n\nRuntime: {rec.min_ns / 1e6:.3f} ms"


def _cmd_eval_input(session: AgentSession, cmd: Command) -> str:
    payload, err = _parse_literal(session, cmd.input_text)
    if err:
        return err
    try:
        handle = prepare_candidate(session.workspace, session.config.limits, session.task)
    except BuildError as exc:
        return f"Build failed: {exc}"
    ref = _reference_on(session, cmd.input_text, payload)
    lit = LiteralInstance(session.task_id, cmd.input_text, payload)
    rec = time_solver_on_instance(handle, session.task, lit, repeats=1, limits=session.config.limits,
                                  baseline_ns=ref.min_ns, capture_stdout=True, keep_outputs=True)
    lines = []
    if rec.status in ("ok", "invalid"):
        lines.append(f"Your output:\n{_preview(session.task, rec.output)}")
    else:
        lines.append(f"Your solver failed ({rec.status}).")
        lines.append(describe_failure(session.workspace, rec))
    if ref.status == "ok":
        lines.append(f"\nReference output:\n{_preview(session.task, ref.output)}")
    else:
        lines.append(f"\nThe reference solver failed on this input ({ref.status}).")
    if rec.status in ("ok", "invalid"):
        lines.append("\nValid: yes" if rec.status == "ok" else f"\nValid: no ({rec.verdict.reason})")
        if ref.min_ns:
            lines.append(f"Runtime: yours {rec.min_ns / 1e6:.3f} ms, reference {ref.min_ns / 1e6:.3f} ms")
    lines.append("\nStandard output:\n" + (rec.stdout or "(nothing printed)"))
    return "\n".join(lines)


def _cmd_profile(session: AgentSession, cmd: Command) -> str:
    try:
        path = resolve_in_workspace(session.workspace, cmd.file)
    except EditRejected as exc:
        return f"Cannot profile: {exc}"
    if path.suffix != ".py" or not path.is_file():
        return f"Cannot profile {cmd.file}: not an existing Python file in the workspace."
    payload, err = _parse_literal(session, cmd.input_text)
    if err:
        return err
    try:
        handle = prepare_candidate(session.workspace, session.config.limits, session.task)
    except BuildError as exc:
        return f"Build failed: {exc}"
    lit = LiteralInstance(session.task_id, cmd.input_text, payload)
    reply = profile_solver(handle, session.task, lit, session.config.limits)
    if reply.get("status") != "ok":
        return f"Profiling failed ({reply.get('status')}).\n" + describe_error(
            session.workspace, reply.get("error"), reply.get("traceback"), str(reply.get("status")))
    rows = [r for r in reply["lines"] if r["file"] == path.name]
    total_s = reply["total_ns"] / 1e9 or 1e-12
    if cmd.verb == "profile":
        rows = sorted(rows, key=lambda r: -r["time_s"])[:PROFILE_TOP]
        title = f"Top {len(rows)} lines of {cmd.file} by time"
    else:
        wanted = set(cmd.line_numbers)
        by_line = {r["lineno"]: r for r in rows}
        rows = [by_line.get(n, {"lineno": n, "hits": 0, "time_s": 0.0}) for n in sorted(wanted)]
        title = f"Requested lines of {cmd.file}"
    source = read_lines(path)
    out = [f"{title} (total solve time {total_s * 1e3:.3f} ms)",
           f"{'Line':>6} {'Hits':>10} {'Time (ms)':>12} {'% Time':>7}  Code"]
    for r in rows:
        code = source[r["lineno"] - 1].strip() if 0 < r["lineno"] <= len(source) else ""
        share = 100.0 * r["time_s"] / total_s
        out.append(f"{r['lineno']:>6} {r['hits']:>10} {r['time_s'] * 1e3:>12.3f} {share:>7.1f}  {code}")
    if not rows:
        out.append("(no lines of this file were executed)")
    return "\n".join(out)


def _cmd_view(session: AgentSession, cmd: Command) -> str:
    try:
        path = resolve_in_workspace(session.workspace, cmd.file)
    except EditRejected as exc:
        return f"Cannot view: {exc}"
    if not path.is_file():
        return f"File {cmd.file} does not exist. Use ls to list the workspace."
    lines = read_lines(path)
    if cmd.start and lines and cmd.start > len(lines):
        return f"{cmd.file} has only {len(lines)} lines."
    return numbered_view(cmd.file, lines, cmd.start or 1, window=VIEW_LINES)


def _cmd_ls(session: AgentSession) -> str:
    names = list_files(session.workspace)
    if not names:
        return "The workspace is empty."
    return "Files in the workspace:\n" + "\n".join(
        f"  {name} ({len(read_lines(session.workspace / name))} lines)" for name in names)


def _cmd_revert(session: AgentSession) -> str:
    snap = session.best_snapshot
    if snap is None:
        return "Nothing to revert to: no version has been saved yet (a save needs all outputs valid)."
    restore_files(session.workspace, snap.files)
    session.emit("revert", spent=session.budget_spent, dev_speedup=snap.dev_speedup)
    return f"Reverted all files to the best saved version (dev speedup {snap.dev_speedup:.2f}x)."


def run_command(session: AgentSession, cmd: Command) -> Feedback:
    verb = cmd.verb
    note = None
    if verb in ("edit", "delete"):
        body, note = _edit(session, cmd)
    elif verb == "eval":
        body, note = _evaluate(session)
    elif verb == "ls":
        body = _cmd_ls(session)
    elif verb == "view_file":
        body = _cmd_view(session, cmd)
    elif verb == "revert":
        body = _cmd_revert(session)
    elif verb == "reference":
        body = _cmd_reference(session, cmd)
    elif verb == "eval_input":
        body = _cmd_eval_input(session, cmd)
    elif verb in ("profile", "profile_lines"):
        body = _cmd_profile(session, cmd)
    else:
        raise ValueError(f"unknown command {verb!r}")
    return session.feedback(body, note)


# main loop -------------------------------------------------------------------

def _execute_turn(session: AgentSession, text: str) -> Feedback:
    parsed = parse_turn(text)
    if parsed.command is None:
        return session.feedback("Your message could not be executed. " + parsed.error)
    try:
        return run_command(session, parsed.command)
    except Exception as exc:
        log.exception("command %s failed", parsed.command.verb)
        session.emit("harness_error", spent=session.budget_spent, verb=parsed.command.verb,
                     traceback=traceback.format_exc())
        return session.feedback(f"The harness could not run {parsed.command.verb}: {type(exc).__name__}: {exc}")


def _terminate(session: AgentSession, reason: str) -> None:
    session.terminated = True
    session.termination_reason = reason
    if session.best_snapshot is not None:
        session.submission = session.best_snapshot.files
    else:
        session.submission = session.initial_files
    restore_files(session.workspace, session.submission)
    best = session.best_snapshot.dev_speedup if session.best_snapshot else None
    session.emit("terminated", spent=session.budget_spent, reason=reason, best_dev_speedup=best,
                 messages_sent=session.messages_sent)


def run_session(task: TaskDefinition, backend, budget: float, config: SessionConfig | None = None,
                workspace: Path | str | None = None, event_sink=None) -> AgentSession:
    if not budget > 0:
        raise ValueError(f"budget must be positive, got {budget}")
    workspace = Path(workspace) if workspace is not None else Path(tempfile.mkdtemp(prefix=f"optforge_{task.task_id}_"))
    session = AgentSession.create(task, workspace, budget, config, event_sink)
    session.emit("start", spent=0.0, budget=budget, backend=getattr(backend, "name", type(backend).__name__))
    while True:
        context = truncate_history(session.message_log, session.config.token_limit)
        remaining = session.budget_remaining
        if remaining <= 0:
            _terminate(session, "budget_exhausted")
            break
        if backend.quote(context) > remaining:
            _terminate(session, "budget_exhausted")
            break
        try:
            text, cost = backend.propose(context)
        except BackendStop:
            _terminate(session, "backend_stop")
            break
        except BackendError as exc:
            session.emit("backend_error", spent=session.budget_spent, message=str(exc))
            _terminate(session, "backend_error")
            break
        session.messages_sent += 1
        if cost < 0:
            raise ValueError(f"backend reported negative cost {cost}")
        if session.budget_spent + cost > session.budget_total:
            # the reply cannot be paid for in full; charge what is left and stop
            session.budget_spent = session.budget_total
            session.emit("turn", spent=session.budget_spent, messages_sent=session.messages_sent,
                         executed=False)
            _terminate(session, "budget_exhausted")
            break
        session.budget_spent += cost
        session.message_log.append({"role": "assistant", "content": text})
        fb = _execute_turn(session, text)
        session.feedback_log.append(fb)
        session.message_log.append({"role": "user", "content": fb.text})
        session.emit("turn", spent=session.budget_spent, messages_sent=session.messages_sent,
                     executed=True, header=fb.header)
        if session.budget_spent >= session.budget_total:
            _terminate(session, "budget_exhausted")
            break
    return session
