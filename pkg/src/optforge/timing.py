"""Isolated, repeat-and-keep-minimum timing of reference and candidate solvers.

Every suite gets one fresh worker process (``optforge._worker``).  For each
instance the worker performs ``repeats`` rounds of one untimed warmup call and
one timed call on ``time.perf_counter_ns``; the minimum sample is kept and the
output of the final timed call is verified here, in the harness process.
"""

from __future__ import annotations

import os
import pickle
import signal
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from . import wire
from .tasks import InstanceRef, ProblemInstance, SolutionVerdict, TaskDefinition, generate_problem, verify

MEM_LIMIT_ENV = "OPTFORGE_MEM_LIMIT_MB"
STATUSES = ("ok", "invalid", "timeout", "crash", "oom")
_SRC_ROOT = str(Path(__file__).resolve().parent.parent)


class BuildError(Exception):
    def __init__(self, message: str, output: str = ""):
        self.output = output
        super().__init__(message)


class BuildTimeout(BuildError):
    pass


@dataclass(frozen=True)
class RunLimits:
    per_instance_timeout_multiplier: float = 10.0
    compile_budget: float = 120.0
    mem_limit: int | None = 14 * 1024**3
    cpu_pinning: tuple[int, ...] | None = None
    # used when no baseline is known: 50x the 100 ms target
    fallback_timeout_s: float = 5.0
    # floor on the per-call limit so tiny baselines don't trip on scheduler jitter
    min_timeout_s: float = 0.05
    generation_timeout_s: float = 300.0

    def __post_init__(self):
        if self.per_instance_timeout_multiplier < 1:
            raise ValueError("timeout multiplier must be >= 1")
        if self.compile_budget < 0:
            raise ValueError("compile budget must be >= 0")

    def call_timeout_s(self, baseline_ns: int | None) -> float:
        if baseline_ns is None:
            return self.fallback_timeout_s
        return max(self.per_instance_timeout_multiplier * baseline_ns / 1e9, self.min_timeout_s)

    def to_dict(self) -> dict:
        return {
            "per_instance_timeout_multiplier": self.per_instance_timeout_multiplier,
            "compile_budget": self.compile_budget,
            "mem_limit": self.mem_limit,
            "cpu_pinning": list(self.cpu_pinning) if self.cpu_pinning else None,
            "fallback_timeout_s": self.fallback_timeout_s,
            "min_timeout_s": self.min_timeout_s,
        }


@dataclass
class TimingRecord:
    instance: InstanceRef
    samples_ns: list[int]
    min_ns: int | None
    verdict: SolutionVerdict
    status: str
    traceback: str | None = None
    error: dict | None = None
    stdout: str | None = None
    output: Any = field(default=None, repr=False, compare=False)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_dict(self) -> dict:
        return {
            "instance": self.instance.to_dict(),
            "samples_ns": list(self.samples_ns),
            "min_ns": self.min_ns,
            "verdict": self.verdict.to_dict(),
            "status": self.status,
            "traceback": self.traceback,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TimingRecord":
        v = d["verdict"]
        return cls(
            instance=InstanceRef.from_dict(d["instance"]),
            samples_ns=list(d["samples_ns"]),
            min_ns=d["min_ns"],
            verdict=SolutionVerdict(v["valid"], v.get("reason")),
            status=d["status"],
            traceback=d.get("traceback"),
            error=d.get("error"),
        )


# solver handles ---------------------------------------------------------

@dataclass(frozen=True)
class ReferenceSolver:
    task: TaskDefinition

    def worker_spec(self) -> dict:
        return {"kind": "reference"}

    @property
    def init_budget(self) -> float | None:
        return None


@dataclass(frozen=True)
class CandidateHandle:
    workspace: Path
    module: str = "solver"
    compile_budget: float = 120.0

    def worker_spec(self) -> dict:
        return {"kind": "candidate", "workspace": str(self.workspace), "module": self.module}

    @property
    def init_budget(self) -> float | None:
        return self.compile_budget


def prepare_candidate(workspace: Path | str, limits: RunLimits, task: TaskDefinition | None = None) -> CandidateHandle:
    """Build and prime a candidate outside any timed region.

    A ``setup.py`` in the workspace is run as ``build_ext --inplace``.  The
    solver module is then imported and ``Solver()`` constructed once in a
    scratch worker so import-time and init-time failures surface here.  Both
    steps share ``limits.compile_budget``.
    """
    ws = Path(workspace).resolve()
    if not ws.is_dir():
        raise BuildError(f"workspace {ws} does not exist")
    if not (ws / "solver.py").is_file():
        raise BuildError("workspace has no solver.py entry point")
    if (ws / "solver.py").stat().st_size == 0:
        raise BuildError("solver.py is empty")
    deadline = time.monotonic() + limits.compile_budget
    if (ws / "setup.py").is_file():
        try:
            proc = subprocess.run(
                [sys.executable, "setup.py", "build_ext", "--inplace"],
                cwd=ws, capture_output=True, text=True, timeout=limits.compile_budget,
            )
        except subprocess.TimeoutExpired as exc:
            raise BuildTimeout(
                f"build exceeded the compile budget of {limits.compile_budget:g} s",
                output=_text(exc.stdout) + _text(exc.stderr),
            ) from None
        if proc.returncode != 0:
            raise BuildError(f"build failed with exit code {proc.returncode}", output=proc.stdout + proc.stderr)
    handle = CandidateHandle(ws, compile_budget=limits.compile_budget)
    if task is None or task.plugin_path is None:
        return handle
    remaining = max(deadline - time.monotonic(), 0.0)
    worker = _WorkerProcess(task, handle, limits)
    try:
        reply = worker.start(init_timeout=remaining)
    except wire.WireTimeout:
        worker.kill()
        raise BuildTimeout(f"solver initialisation exceeded the compile budget of {limits.compile_budget:g} s") from None
    except wire.WireClosed:
        raise BuildError("solver process died during initialisation", output=worker.stderr_tail()) from None
    finally:
        worker.close()
    if reply.get("status") != "ok":
        raise BuildError(_format_init_failure(reply), output=reply.get("traceback") or "")
    return handle


def _text(value) -> str:
    if value is None:
        return ""
    return value.decode(errors="replace") if isinstance(value, bytes) else value


def _format_init_failure(reply: dict) -> str:
    err = reply.get("error") or {}
    if err:
        where = f" at line {err['lineno']} in {err['file']}" if err.get("lineno") else ""
        return f"{err.get('exc_type')}: {err.get('message')}{where}"
    return (reply.get("traceback") or "solver failed to initialise").strip().splitlines()[-1]


# worker process ---------------------------------------------------------

class _WorkerProcess:
    def __init__(self, task: TaskDefinition, solver, limits: RunLimits):
        self.task = task
        self.solver = solver
        self.limits = limits
        self.proc: subprocess.Popen | None = None
        self._log = None

    def start(self, init_timeout: float | None = None) -> dict:
        env = dict(os.environ)
        env["PYTHONPATH"] = os.pathsep.join(p for p in (_SRC_ROOT, env.get("PYTHONPATH")) if p)
        if self.limits.mem_limit:
            env[MEM_LIMIT_ENV] = str(self.limits.mem_limit // (1024 * 1024))
        else:
            env.pop(MEM_LIMIT_ENV, None)
        env.setdefault("OMP_NUM_THREADS", env.get("OMP_NUM_THREADS", "1"))
        self._log = tempfile.TemporaryFile()
        self.proc = subprocess.Popen(
            [sys.executable, "-m", "optforge._worker"],
            stdin=subprocess.PIPE, stdout=subprocess.PIPE, stderr=self._log,
            env=env, cwd=str(getattr(self.solver, "workspace", None) or Path.cwd()),
        )
        msg = {
            "cmd": "init",
            "task_plugin": str(self.task.plugin_path),
            "task_id": self.task.task_id,
            "solver": self.solver.worker_spec(),
            "cpu_pinning": list(self.limits.cpu_pinning) if self.limits.cpu_pinning else None,
        }
        if init_timeout is None:
            init_timeout = self.solver.init_budget or self.limits.generation_timeout_s
        return self.request(msg, timeout=init_timeout)

    def request(self, msg: dict, timeout: float | None) -> dict:
        assert self.proc is not None
        wire.send(self.proc.stdin.fileno(), msg)
        return wire.recv(self.proc.stdout.fileno(), timeout=timeout)

    def stderr_tail(self, limit: int = 4000) -> str:
        if self._log is None:
            return ""
        self._log.seek(0)
        return self._log.read().decode(errors="replace")[-limit:]

    def died_as(self) -> str:
        """Classify an unexpected worker exit."""
        if self.proc is None:
            return "crash"
        code = self.proc.wait(timeout=5)
        if code == -signal.SIGKILL or "MemoryError" in self.stderr_tail():
            return "oom"
        return "crash"

    def kill(self) -> None:
        if self.proc and self.proc.poll() is None:
            self.proc.kill()
            self.proc.wait()

    def close(self) -> None:
        if self.proc is None:
            return
        if self.proc.poll() is None:
            try:
                self.request({"cmd": "exit"}, timeout=5)
            except (wire.WireClosed, wire.WireTimeout, OSError):
                pass
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.kill()
        for stream in (self.proc.stdin, self.proc.stdout):
            if stream:
                stream.close()
        if self._log:
            self._log.close()
            self._log = None
        self.proc = None


# suite execution --------------------------------------------------------

def _payload_ref(instance, tmpdir: str, index: int) -> dict:
    if isinstance(instance, ProblemInstance):
        path = os.path.join(tmpdir, f"payload_{index}.pkl")
        with open(path, "wb") as fh:
            pickle.dump(instance.payload, fh, protocol=pickle.HIGHEST_PROTOCOL)
        return {"path": path}
    if isinstance(instance, LiteralInstance):
        return {"literal": instance.text}
    return {"task_id": instance.task_id, "n": instance.n, "seed": instance.seed}


@dataclass(frozen=True)
class LiteralInstance:
    """An input given as literal text (agent ``reference`` / ``eval_input``)."""

    task_id: str
    text: str
    payload: Any = field(default=None, compare=False, repr=False)

    @property
    def ref(self) -> InstanceRef:
        return InstanceRef(self.task_id, 1, -1, "dev")


def _ref(instance) -> InstanceRef:
    return instance.ref if hasattr(instance, "ref") else instance


def _materialize(task: TaskDefinition, instance) -> ProblemInstance:
    if isinstance(instance, ProblemInstance):
        return instance
    if isinstance(instance, LiteralInstance):
        payload = instance.payload if instance.payload is not None else task.parse_input(instance.text)
        return ProblemInstance(task.task_id, 1, -1, "dev", payload)
    return generate_problem(task, instance.n, instance.seed, instance.split)


def _failed(ref: InstanceRef, status: str, reason: str, samples=(), **extra) -> TimingRecord:
    return TimingRecord(ref, list(samples), None, SolutionVerdict.reject(reason), status, **extra)


def run_suite(
    solver,
    task: TaskDefinition,
    instances: Sequence,
    repeats: int = 10,
    limits: RunLimits | None = None,
    baselines_ns: Sequence[int | None] | None = None,
    *,
    warmups: int = 0,
    per_repeat_warmup: bool = True,
    verify_outputs: bool = True,
    capture_stdout: bool = False,
    keep_outputs: bool = False,
) -> list[TimingRecord]:
    """Time ``solver`` on each instance in order, in one fresh worker.

    Per-instance failures are recorded, never raised.  If the worker dies or
    hangs it is replaced and the suite continues with the next instance.
    """
    if not instances:
        raise ValueError("run_suite needs at least one instance")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    limits = limits or RunLimits()
    if baselines_ns is not None and len(baselines_ns) != len(instances):
        raise ValueError("baselines_ns must align with instances")
    for inst in instances:
        if _ref(inst).task_id != task.task_id:
            raise ValueError(f"instance for {_ref(inst).task_id!r} passed to {task.task_id!r} suite")
    records: list[TimingRecord] = []
    with tempfile.TemporaryDirectory(prefix="optforge_suite_") as tmpdir:
        worker: _WorkerProcess | None = None
        try:
            for i, inst in enumerate(instances):
                ref = _ref(inst)
                if worker is None:
                    worker = _WorkerProcess(task, solver, limits)
                    try:
                        reply = worker.start()
                    except (wire.WireTimeout, wire.WireClosed) as exc:
                        status = worker.died_as() if isinstance(exc, wire.WireClosed) else "timeout"
                        tail = worker.stderr_tail()
                        worker.kill()
                        worker.close()
                        worker = None
                        records.append(_failed(ref, status, f"worker failed to start ({status})", traceback=tail))
                        continue
                    if reply.get("status") != "ok":
                        worker.close()
                        worker = None
                        records.append(_failed(ref, reply.get("status", "crash") if reply.get("status") in STATUSES else "crash",
                                               "solver failed to initialise: " + _format_init_failure(reply),
                                               traceback=reply.get("traceback"), error=reply.get("error")))
                        continue
                baseline = baselines_ns[i] if baselines_ns is not None else None
                call_limit = limits.call_timeout_s(baseline)
                out_path = os.path.join(tmpdir, f"out_{i}.pkl") if (verify_outputs or keep_outputs) else None
                msg = {
                    "cmd": "run",
                    "payload_ref": _payload_ref(inst, tmpdir, i),
                    "repeats": repeats,
                    "warmups": warmups,
                    "per_repeat_warmup": per_repeat_warmup,
                    "call_timeout_s": call_limit,
                    "output_path": out_path,
                    "capture_stdout": capture_stdout,
                }
                calls = warmups + repeats * (2 if per_repeat_warmup else 1)
                hard_deadline = calls * call_limit * 1.5 + limits.generation_timeout_s
                try:
                    reply = worker.request(msg, timeout=hard_deadline)
                except wire.WireTimeout:
                    worker.kill()
                    worker.close()
                    worker = None
                    records.append(_failed(ref, "timeout", "exceeded harness deadline"))
                    continue
                except wire.WireClosed:
                    status = worker.died_as()
                    tail = worker.stderr_tail()
                    worker.close()
                    worker = None
                    records.append(_failed(ref, status, f"worker died ({status})", traceback=tail))
                    continue
                records.append(_record_from_reply(task, inst, ref, reply, verify_outputs, keep_outputs))
        finally:
            if worker is not None:
                worker.close()
    return records


def _record_from_reply(task, inst, ref, reply, verify_outputs, keep_outputs) -> TimingRecord:
    status = reply.get("status", "crash")
    samples = [int(s) for s in reply.get("samples_ns", [])]
    stdout = reply.get("stdout")
    if status != "ok":
        reasons = {"timeout": "timed out", "oom": "memory limit exceeded", "crash": "solver raised an exception"}
        if reply.get("phase") == "generate":
            reasons["crash"] = "input generation failed"
        return _failed(ref, status if status in STATUSES else "crash", reasons.get(status, status), samples,
                       traceback=reply.get("traceback"), error=reply.get("error"), stdout=stdout)
    output = None
    if reply.get("output_ref"):
        with open(reply["output_ref"], "rb") as fh:
            output = pickle.load(fh)
    verdict = SolutionVerdict.ok()
    if verify_outputs:
        verdict = verify(task, _materialize(task, inst), output)
    return TimingRecord(
        instance=ref,
        samples_ns=samples,
        min_ns=min(samples),
        verdict=verdict,
        status="ok" if verdict.valid else "invalid",
        stdout=stdout,
        output=output if keep_outputs else None,
    )


def time_solver_on_instance(
    solver,
    task: TaskDefinition,
    instance,
    repeats: int = 10,
    limits: RunLimits | None = None,
    baseline_ns: int | None = None,
    **kwargs,
) -> TimingRecord:
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    return run_suite(solver, task, [instance], repeats, limits, [baseline_ns], **kwargs)[0]


def profile_solver(solver, task: TaskDefinition, instance, limits: RunLimits | None = None,
                   baseline_ns: int | None = None) -> dict:
    """Run ``solver`` once on ``instance`` under the statement-level profiler."""
    limits = limits or RunLimits()
    worker = _WorkerProcess(task, solver, limits)
    with tempfile.TemporaryDirectory(prefix="optforge_prof_") as tmpdir:
        try:
            reply = worker.start()
            if reply.get("status") != "ok":
                return reply
            msg = {"cmd": "profile", "payload_ref": _payload_ref(instance, tmpdir, 0),
                   "call_timeout_s": limits.call_timeout_s(baseline_ns)}
            return worker.request(msg, timeout=limits.call_timeout_s(baseline_ns) * 20 + limits.generation_timeout_s)
        except wire.WireTimeout:
            worker.kill()
            return {"status": "timeout"}
        except wire.WireClosed:
            return {"status": worker.died_as(), "traceback": worker.stderr_tail()}
        finally:
            worker.close()
