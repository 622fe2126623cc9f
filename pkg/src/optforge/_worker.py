"""Solver worker process: ``python -m optforge._worker``.

Reads framed commands on stdin and answers on the original stdout.  Solver
``print`` output is diverted away from the protocol pipe.  The memory cap is
read from ``OPTFORGE_MEM_LIMIT_MB`` before anything heavy is imported.
"""

import os
import sys


def _apply_mem_limit():
    raw = os.environ.get("OPTFORGE_MEM_LIMIT_MB")
    if not raw:
        return
    import resource

    limit = int(float(raw) * 1024 * 1024)
    if limit > 0:
        resource.setrlimit(resource.RLIMIT_AS, (limit, limit))


def _claim_protocol_fds():
    proto_out = os.dup(1)
    proto_in = os.dup(0)
    os.dup2(2, 1)
    devnull = os.open(os.devnull, os.O_RDONLY)
    os.dup2(devnull, 0)
    os.close(devnull)
    return proto_in, proto_out


if __name__ == "__main__":
    _PROTO_IN, _PROTO_OUT = _claim_protocol_fds()
    _apply_mem_limit()

import contextlib  # noqa: E402
import gc  # noqa: E402
import importlib.util  # noqa: E402
import io  # noqa: E402
import pickle  # noqa: E402
import signal  # noqa: E402
import time  # noqa: E402
import traceback  # noqa: E402
from pathlib import Path  # noqa: E402

from optforge import wire  # noqa: E402


class CallTimeout(BaseException):
    """Raised from SIGALRM; BaseException so solver ``except Exception`` can't eat it."""


def _on_alarm(signum, frame):
    raise CallTimeout()


def _qualified_name(exc_type) -> str:
    module = exc_type.__module__
    if module in ("builtins", "__main__", None):
        return exc_type.__qualname__
    return f"{module}.{exc_type.__qualname__}"


def error_info(exc: BaseException, focus_dir: str | None) -> dict:
    """Locate the innermost frame that belongs to ``focus_dir`` (the solver code)."""
    frames = traceback.extract_tb(exc.__traceback__)
    chosen = None
    if focus_dir:
        root = os.path.realpath(focus_dir)
        for fr in frames:
            path = os.path.realpath(fr.filename)
            if path == root or path.startswith(root + os.sep):
                chosen = fr
    if chosen is None and frames:
        chosen = frames[-1]
    info = {"exc_type": _qualified_name(type(exc)), "message": str(exc)}
    if chosen is not None:
        filename = chosen.filename
        if focus_dir:
            try:
                filename = os.path.relpath(os.path.realpath(filename), os.path.realpath(focus_dir))
            except ValueError:
                pass
        info.update(file=filename, lineno=chosen.lineno, function=chosen.name)
    return info


class Worker:
    def __init__(self):
        self.task = None
        self.solve = None
        self.focus_dir = None
        self.module = None
        signal.signal(signal.SIGALRM, _on_alarm)

    # commands -----------------------------------------------------------
    def init(self, msg):
        if msg.get("cpu_pinning"):
            os.sched_setaffinity(0, set(msg["cpu_pinning"]))
        self.task = self._load_plugin(msg["task_plugin"])
        solver = msg["solver"]
        if solver["kind"] == "reference":
            self.solve = self.task.solve
            self.focus_dir = str(Path(msg["task_plugin"]).parent)
        else:
            self.focus_dir = solver["workspace"]
            self.solve = self._load_candidate(solver["workspace"], solver.get("module", "solver"))
        return {"status": "ok"}

    def _load_plugin(self, path):
        spec = importlib.util.spec_from_file_location(f"optforge_task_{Path(path).parent.name}", path)
        module = importlib.util.module_from_spec(spec)
        sys.modules[spec.name] = module
        spec.loader.exec_module(module)
        return module.Task()

    def _load_candidate(self, workspace, module_name):
        path = Path(workspace) / f"{module_name}.py"
        if not path.is_file():
            raise FileNotFoundError(f"{module_name}.py not found in workspace")
        sys.path.insert(0, str(workspace))
        spec = importlib.util.spec_from_file_location(module_name, path)
        module = importlib.util.module_from_spec(spec)
        sys.modules[module_name] = module
        spec.loader.exec_module(module)
        self.module = module
        cls = getattr(module, "Solver", None)
        if cls is not None:
            return cls().solve
        fn = getattr(module, "solve", None)
        if callable(fn):
            return fn
        raise AttributeError("solver.py defines neither a Solver class nor a solve() function")

    def _payload(self, ref):
        if "path" in ref:
            with open(ref["path"], "rb") as fh:
                return fh.read()
        if "literal" in ref:
            import ast

            value = ast.literal_eval(ref["literal"])
            hook = getattr(self.task, "parse_input", None)
            payload = hook(value) if hook else value
        else:
            payload = self.task.generate_problem(int(ref["n"]), int(ref["seed"]))
        return pickle.dumps(payload, protocol=pickle.HIGHEST_PROTOCOL)

    def _call(self, blob, limit_s):
        problem = pickle.loads(blob)
        if limit_s:
            signal.setitimer(signal.ITIMER_REAL, limit_s)
        try:
            start = time.perf_counter_ns()
            out = self.solve(problem)
            elapsed = time.perf_counter_ns() - start
        finally:
            if limit_s:
                signal.setitimer(signal.ITIMER_REAL, 0)
        if limit_s and elapsed > limit_s * 1e9:
            raise CallTimeout()
        return out, elapsed

    def run(self, msg):
        try:
            blob = self._payload(msg["payload_ref"])
        except MemoryError:
            return {"status": "oom", "samples_ns": [], "traceback": "MemoryError during generation"}
        except Exception as exc:
            return {"status": "crash", "phase": "generate", "samples_ns": [],
                    "traceback": traceback.format_exc(), "error": error_info(exc, None)}
        repeats = int(msg.get("repeats", 10))
        warmups = int(msg.get("warmups", 0))
        per_repeat = bool(msg.get("per_repeat_warmup", True))
        limit = msg.get("call_timeout_s")
        capture = bool(msg.get("capture_stdout"))
        samples = []
        out = None
        sink = io.StringIO()
        redirect = contextlib.redirect_stdout(sink) if capture else contextlib.nullcontext()
        try:
            with redirect:
                for _ in range(warmups):
                    self._call(blob, limit)
                for _ in range(repeats):
                    if per_repeat:
                        self._call(blob, limit)
                    out, elapsed = self._call(blob, limit)
                    samples.append(elapsed)
        except CallTimeout:
            return {"status": "timeout", "samples_ns": samples, "stdout": sink.getvalue()}
        except MemoryError:
            out = None
            gc.collect()
            return {"status": "oom", "samples_ns": samples, "traceback": traceback.format_exc()}
        except Exception as exc:
            return {"status": "crash", "phase": "solve", "samples_ns": samples,
                    "traceback": traceback.format_exc(), "error": error_info(exc, self.focus_dir),
                    "stdout": sink.getvalue()}
        reply = {"status": "ok", "samples_ns": samples, "stdout": sink.getvalue() if capture else None}
        if msg.get("output_path"):
            try:
                with open(msg["output_path"], "wb") as fh:
                    pickle.dump(out, fh, protocol=pickle.HIGHEST_PROTOCOL)
            except Exception as exc:
                return {"status": "crash", "phase": "output", "samples_ns": samples,
                        "traceback": f"solver output is not serializable: {exc!r}"}
            reply["output_ref"] = msg["output_path"]
        return reply

    def profile(self, msg):
        from line_profiler import LineProfiler

        blob = self._payload(msg["payload_ref"])
        prof = LineProfiler()
        target = os.path.realpath(self.focus_dir) if self.focus_dir else None
        seen = set()
        for func in _functions_in(self.module or sys.modules.get(type(self.task).__module__)):
            code = getattr(func, "__code__", None)
            if code is None or code in seen:
                continue
            if target and not os.path.realpath(code.co_filename).startswith(target):
                continue
            seen.add(code)
            prof.add_function(func)
        problem = pickle.loads(blob)
        limit = msg.get("call_timeout_s")
        if limit:
            signal.setitimer(signal.ITIMER_REAL, limit)
        try:
            prof.enable_by_count()
            start = time.perf_counter_ns()
            try:
                self.solve(problem)
            finally:
                total = time.perf_counter_ns() - start
                prof.disable_by_count()
        except CallTimeout:
            return {"status": "timeout"}
        except Exception as exc:
            return {"status": "crash", "traceback": traceback.format_exc(),
                    "error": error_info(exc, self.focus_dir)}
        finally:
            if limit:
                signal.setitimer(signal.ITIMER_REAL, 0)
        stats = prof.get_stats()
        rows = {}
        for (filename, _start, func_name), timings in stats.timings.items():
            for lineno, hits, t in timings:
                key = (filename, lineno)
                prev = rows.get(key)
                secs = t * stats.unit
                if prev:
                    prev["hits"] += hits
                    prev["time_s"] += secs
                else:
                    rows[key] = {"file": os.path.basename(filename), "lineno": lineno, "hits": hits,
                                 "time_s": secs, "function": func_name}
        return {"status": "ok", "total_ns": total, "lines": list(rows.values())}


def _functions_in(module):
    import inspect

    if module is None:
        return []
    found = []
    for obj in vars(module).values():
        if inspect.isfunction(obj):
            found.append(obj)
        elif inspect.isclass(obj) and obj.__module__ == module.__name__:
            for attr in vars(obj).values():
                fn = attr.__func__ if isinstance(attr, (staticmethod, classmethod)) else attr
                if inspect.isfunction(fn):
                    found.append(fn)
    return found


def main():
    worker = Worker()
    while True:
        try:
            msg = wire.recv(_PROTO_IN)
        except wire.WireClosed:
            return
        cmd = msg.get("cmd")
        if cmd == "exit":
            wire.send(_PROTO_OUT, {"status": "bye"})
            return
        try:
            if cmd == "init":
                reply = worker.init(msg)
            elif cmd == "run":
                reply = worker.run(msg)
            elif cmd == "profile":
                reply = worker.profile(msg)
            else:
                reply = {"status": "crash", "traceback": f"unknown command {cmd!r}"}
        except MemoryError:
            reply = {"status": "oom", "traceback": "MemoryError"}
        except CallTimeout:
            reply = {"status": "timeout"}
        except Exception as exc:
            reply = {"status": "crash", "traceback": traceback.format_exc(),
                     "error": error_info(exc, worker.focus_dir)}
        wire.send(_PROTO_OUT, reply)


if __name__ == "__main__":
    main()
