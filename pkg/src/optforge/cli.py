"""Command-line entry point: validate, calibrate, evaluate, agent, report.

Exit codes: 0 success, 1 failures were recorded, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .agent import HttpBackend, ScriptedBackend, SessionConfig, run_session
from .calibrate import calibrate_bundle
from .config import ConfigError, HarnessConfig
from .evaluate import evaluate_candidate
from .qa import QaConfig, qa_bundle
from .report import render_report
from .results import ResultsWriter, read_results
from .scoring import BenchmarkReport, ScoringError, aggregate, budget_curve
from .tasks import BundleError, Registry, load_registry

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2
RESULTS_FILE = "results.jsonl"
SIZES_FILE = "sizes.json"

log = logging.getLogger("optforge")


class UsageError(Exception):
    pass


# shared plumbing -------------------------------------------------------

def _registry(cfg: HarnessConfig) -> Registry:
    bundle = Path(cfg.bundle)
    if not bundle.is_dir():
        raise UsageError(f"bundle directory {bundle} does not exist")
    try:
        registry = load_registry(bundle)
    except BundleError as exc:
        raise UsageError(str(exc)) from exc
    if cfg.tasks:
        missing = [t for t in cfg.tasks if t not in registry]
        if missing:
            raise UsageError(f"unknown task id(s): {', '.join(missing)}")
        registry = registry.select(cfg.tasks)
    if not len(registry):
        raise UsageError(f"bundle {bundle} contains no tasks")
    return registry


def _writer(cfg: HarnessConfig) -> ResultsWriter:
    return ResultsWriter(Path(cfg.out) / RESULTS_FILE)


def _size(cfg: HarnessConfig, sizes: dict, task) -> int:
    return sizes.get(task.task_id) or task.default_n or 100


def _meta(cfg: HarnessConfig, writer: ResultsWriter, **extra) -> dict:
    return {"run_id": writer.run_id, "config_hash": cfg.config_hash(), **extra}


# subcommands -----------------------------------------------------------------

def cmd_validate(cfg: HarnessConfig) -> int:
    registry = _registry(cfg)
    sizes = cfg.load_sizes()
    writer = _writer(cfg)
    qa_cfg = QaConfig(repeats=5, dev_instances=cfg.qa_instances, solver_seeds=cfg.qa_solver_seeds,
                      dev_seed_base=cfg.dev_seed_base, n_max=cfg.n_max, limits=cfg.limits())
    failed = 0
    for report in qa_bundle(registry, qa_cfg, sizes):
        writer.write("qa", report.to_dict())
        status = "PASS" if report.passed else "FAIL"
        print(f"{status}  {report.task_id}  monotonicity={report.monotonicity_pass} "
              f"seed_robustness={report.seed_robustness_pass}")
        for note in report.notes:
            print(f"      {note}")
        failed += not report.passed
    print(f"{len(registry) - failed}/{len(registry)} tasks passed")
    return EXIT_FAILED if failed else EXIT_OK


def cmd_calibrate(cfg: HarnessConfig, measure_factory=None) -> int:
    registry = _registry(cfg)
    writer = _writer(cfg)
    results = calibrate_bundle(registry, cfg.target_time, cfg.grid_params(), measure_factory=measure_factory)
    sizes = {}
    for res in results:
        writer.write("calibration", res.to_dict())
        sizes[res.task_id] = res.chosen_n
        mean = res.chosen_mean()
        shown = "-" if mean is None else f"{mean * 1e3:.2f} ms"
        print(f"{res.task_id:<32} n={res.chosen_n}  mean={shown}  probes={res.measurements}"
              + (f"  ({res.note})" if res.note else ""))
    manifest = {"target_time": cfg.target_time, "config_hash": cfg.config_hash(), "sizes": sizes}
    path = Path(cfg.out) / SIZES_FILE
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"sizes written to {path}")
    return EXIT_FAILED if any(n is None for n in sizes.values()) else EXIT_OK


def _score_workspaces(cfg: HarnessConfig, registry: Registry, workspaces: dict, label: str,
                      writer: ResultsWriter) -> tuple[BenchmarkReport, int]:
    sizes = cfg.load_sizes()
    scores, failures = [], 0
    for task_id in registry:
        task = registry[task_id]
        ev = evaluate_candidate(task, workspaces[task_id], _size(cfg, sizes, task),
                                test_count=cfg.test_count, test_seed_base=cfg.test_seed_base,
                                repeats=cfg.repeats, timing_runs=cfg.timing_runs, limits=cfg.limits(),
                                mode=cfg.speedup_mode)
        for side, records in (("reference", ev.ref_records), ("candidate", ev.cand_records)):
            for rec in records:
                writer.write("timing", {"backend": label, "side": side, **rec.to_dict()})
        writer.write("task_score", {"backend": label, "build_error": ev.build_error, **ev.score.to_dict()})
        s = ev.score
        raw = "n/a" if s.raw_speedup is None else f"{s.raw_speedup:.3f}x"
        print(f"{task_id:<32} recorded={s.recorded_speedup:.3f}x raw={raw} valid={s.valid_fraction:.0%}"
              + (f"  build error: {ev.build_error}" if ev.build_error else ""))
        failures += ev.build_error is not None
        scores.append(s)
    report = aggregate(scores, _meta(cfg, writer, backend=label))
    writer.write("report", report.to_dict())
    print(f"score (harmonic mean) = {report.aggregate_score:.3f}x, sped up: {report.sped_up_pct:.1f}%")
    return report, failures


def cmd_evaluate(cfg: HarnessConfig, candidate: str, label: str = "candidate") -> int:
    registry = _registry(cfg)
    root = Path(candidate)
    if not root.is_dir():
        raise UsageError(f"candidate directory {root} does not exist")
    # a bare workspace is accepted when exactly one task is selected
    if (root / "solver.py").exists() and len(registry) == 1:
        workspaces = {next(iter(registry)): root}
    else:
        workspaces = {t: root / t for t in registry}
    _, failures = _score_workspaces(cfg, registry, workspaces, label, _writer(cfg))
    return EXIT_FAILED if failures else EXIT_OK


def _backend(cfg: HarnessConfig, task_id: str):
    params = dict(cfg.backend_params)
    if cfg.backend == "scripted":
        script = params.get("script")
        if not script:
            raise UsageError("the scripted backend needs a script file (--script)")
        if not Path(script).is_file():
            raise UsageError(f"script file {script} does not exist")
        return ScriptedBackend.from_file(script, params.get("cost_per_turn"), task_id=task_id)
    for key in ("endpoint", "model"):
        if not params.get(key):
            raise UsageError(f"the http backend needs --{key}")
    allowed = {"endpoint", "model", "token_env", "input_rate", "output_rate", "temperature", "top_p",
               "max_tokens", "timeout", "name"}
    return HttpBackend(**{k: v for k, v in params.items() if k in allowed})


def cmd_agent(cfg: HarnessConfig, score: bool = True) -> int:
    registry = _registry(cfg)
    sizes = cfg.load_sizes()
    writer = _writer(cfg)
    backends = {t: _backend(cfg, t) for t in registry}
    label = cfg.backend_params.get("name") or next(iter(backends.values())).name
    root = Path(cfg.out) / "agent" / writer.run_id
    workspaces, errors = {}, 0
    for task_id in registry:
        task = registry[task_id]
        session_cfg = SessionConfig(n=_size(cfg, sizes, task), dev_count=cfg.dev_count,
                                    dev_seed_base=cfg.dev_seed_base, repeats=cfg.repeats,
                                    limits=cfg.limits(), token_limit=cfg.token_limit)

        def sink(record, _label=label):
            writer.write("agent_event", {"backend": _label, **record})

        ws = root / task_id
        session = run_session(task, backends[task_id], cfg.budget, session_cfg, ws, sink)
        best = session.best_snapshot.dev_speedup if session.best_snapshot else None
        shown = "none (empty submission)" if best is None else f"{best:.3f}x"
        print(f"{task_id:<32} {session.termination_reason:<17} spent={session.budget_spent:.4f} "
              f"messages={session.messages_sent} best dev speedup={shown}")
        errors += session.termination_reason == "backend_error"
        workspaces[task_id] = ws
    print(f"submissions in {root}")
    if score:
        # an empty submission scores 1.0; that is an outcome, not a failure
        _score_workspaces(cfg, registry, workspaces, label, writer)
    return EXIT_FAILED if errors else EXIT_OK


def _checkpoints(spec: str | None, events: list[dict]) -> list[float]:
    if spec:
        try:
            return sorted(float(x) for x in spec.split(",") if x.strip())
        except ValueError as exc:
            raise UsageError(f"bad --checkpoints value {spec!r}") from exc
    top = max((float(e.get("budget", 0)) for e in events if e.get("event") == "start"), default=0.0)
    top = top or max((float(e.get("spent", 0)) for e in events), default=1.0) or 1.0
    return [round(top * i / 10, 10) for i in range(11)]


def cmd_report(cfg: HarnessConfig, results: str | None, checkpoints: str | None, plot: bool = True) -> int:
    path = Path(results) if results else Path(cfg.out) / RESULTS_FILE
    if not path.is_file():
        raise UsageError(f"results file {path} does not exist")
    latest: dict[str, BenchmarkReport] = {}
    events_by_backend: dict[str, list[dict]] = {}
    for rec in read_results(path):
        if rec["kind"] == "report":
            rep = BenchmarkReport.from_dict(rec)
            latest[rep.backend] = rep
        elif rec["kind"] == "agent_event":
            events_by_backend.setdefault(rec.get("backend", "agent"), []).append(rec)
    curves = {}
    for backend, events in events_by_backend.items():
        curves[backend] = budget_curve(events, _checkpoints(checkpoints, events))
    if not latest and not curves:
        print(f"nothing to report in {path}", file=sys.stderr)
        return EXIT_FAILED
    out = Path(cfg.out) / "report"
    written = render_report([latest[b] for b in sorted(latest)], out, curves or None, plot=plot)
    print((out / "tables.md").read_text())
    for kind, p in sorted(written.items()):
        print(f"{kind}: {p}")
    return EXIT_OK


# argument parsing ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--tasks", help="comma-separated task ids (default: all)")
    common.add_argument("--out", help="output directory (default: optforge_out)")
    common.add_argument("--bundle", help="task bundle directory (default: bundled seed tasks)")
    common.add_argument("--sizes", help="sizes manifest written by calibrate")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="optforge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", parents=[common], help="run quality checks on every task")

    p = sub.add_parser("calibrate", parents=[common], help="pick n per task for a target runtime")
    p.add_argument("--target-time", type=float, help="target reference runtime in seconds (default 0.1)")

    p = sub.add_parser("evaluate", parents=[common], help="score a candidate on the test split")
    p.add_argument("--candidate", required=True, help="directory with <task_id>/solver.py workspaces")
    p.add_argument("--label", default="candidate", help="name shown for this candidate in reports")

    p = sub.add_parser("agent", parents=[common], help="run the optimization agent")
    p.add_argument("--task", help="single task id (same as --tasks ID)")
    p.add_argument("--budget", type=float, help="cost units per task (default 1.0)")
    p.add_argument("--backend", choices=("scripted", "http"))
    p.add_argument("--script", help="turn list for the scripted backend (JSON)")
    p.add_argument("--cost-per-turn", type=float, help="scripted backend cost per turn")
    p.add_argument("--endpoint", help="chat-completions URL for the http backend")
    p.add_argument("--model", help="model name for the http backend")
    p.add_argument("--no-score", action="store_true", help="skip test-split scoring of submissions")

    p = sub.add_parser("report", parents=[common], help="render tables and budget curves")
    p.add_argument("--results", help="results file (default: <out>/results.jsonl)")
    p.add_argument("--checkpoints", help="comma-separated budget checkpoints for the curve")
    p.add_argument("--no-plot", action="store_true")
    return parser


def _config_from_args(args) -> HarnessConfig:
    overrides = {"out": args.out, "bundle": args.bundle, "sizes": args.sizes}
    tasks = args.tasks or getattr(args, "task", None)
    if tasks:
        overrides["tasks"] = tuple(t.strip() for t in tasks.split(",") if t.strip())
    if args.command == "calibrate":
        overrides["target_time"] = args.target_time
    if args.command == "agent":
        overrides["budget"] = args.budget
        overrides["backend"] = args.backend
    cfg = HarnessConfig.load(args.config, overrides)
    if args.command == "agent":
        params = dict(cfg.backend_params)
        for key in ("script", "cost_per_turn", "endpoint", "model"):
            value = getattr(args, key)
            if value is not None:
                params[key] = value
        cfg = cfg.with_overrides(backend_params=params)
    return cfg


def main(argv=None, measure_factory=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config_from_args(args)
        if args.command == "validate":
            return cmd_validate(cfg)
        if args.command == "calibrate":
            return cmd_calibrate(cfg, measure_factory)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.candidate, args.label)
        if args.command == "agent":
            return cmd_agent(cfg, score=not args.no_score)
        return cmd_report(cfg, args.results, args.checkpoints, plot=not args.no_plot)
    except (UsageError, ConfigError) as exc:
        print(f"optforge {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ScoringError as exc:
        print(f"optforge {args.command}: scoring failed: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
