"""Render benchmark reports as markdown tables, JSON, CSV and an optional plot."""

from __future__ import annotations

import csv
import json
import statistics
from pathlib import Path
from typing import Mapping, Sequence

from .scoring import BenchmarkReport, ScoringError


def _as_list(reports) -> list[BenchmarkReport]:
    if isinstance(reports, BenchmarkReport):
        reports = [reports]
    reports = list(reports)
    if not reports or all(not r.task_scores for r in reports):
        raise ScoringError("nothing to render: empty report")
    return reports


def _md_table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(str(c) for c in row) + " |" for row in rows]
    return "\n".join(lines)


def score_table(reports) -> str:
    reports = _as_list(reports)
    return _md_table([""] + [r.backend for r in reports],
                     [["Score"] + [f"{r.aggregate_score:.2f}x" for r in reports]])


def sped_up_table(reports) -> str:
    reports = _as_list(reports)
    return _md_table([""] + [r.backend for r in reports],
                     [["Pct. of Tasks Sped Up"] + [f"{r.sped_up_pct:.1f}%" for r in reports]])


def per_task_table(reports) -> str:
    reports = _as_list(reports)
    task_ids = sorted({s.task_id for r in reports for s in r.task_scores})
    lookup = [{s.task_id: s for s in r.task_scores} for r in reports]
    rows = []
    for t in task_ids:
        rows.append([t] + [f"{m[t].recorded_speedup:.2f}" if t in m else "-" for m in lookup])
    rows.append(["Harmonic mean"] + [f"{r.aggregate_score:.2f}" for r in reports])
    return _md_table(["Task"] + [r.backend for r in reports], rows)


def timing_rows(report: BenchmarkReport) -> list[tuple[str, int | None, float, float]]:
    """(task, n, mean ms, std ms) across timing runs of the reference solver."""
    rows = []
    for s in sorted(report.task_scores, key=lambda s: s.task_id):
        runs = list(s.ref_run_means_ms)
        if not runs and s.instance_count:
            runs = [s.ref_total_ns / s.instance_count / 1e6]
        if not runs:
            continue
        std = statistics.stdev(runs) if len(runs) > 1 else 0.0
        rows.append((s.task_id, s.n, statistics.fmean(runs), std))
    return rows


def timing_table(reports) -> str:
    report = _as_list(reports)[0]
    rows = [[t, "-" if n is None else n, f"{mean:.2f} ± {std:.2f}"] for t, n, mean, std in timing_rows(report)]
    return _md_table(["Task", "n", "Average Time (ms)"], rows)


def curve_table(curves: Mapping[str, Sequence[tuple[float, float]]]) -> str:
    backends = sorted(curves)
    checkpoints = sorted({c for b in backends for c, _ in curves[b]})
    lookup = {b: dict(curves[b]) for b in backends}
    rows = [[f"{c:g}"] + [f"{lookup[b][c]:.3f}" if c in lookup[b] else "-" for b in backends] for c in checkpoints]
    return _md_table(["Budget"] + backends, rows)


def render_report(reports, out_dir: Path | str, curves: Mapping | None = None, plot: bool = True) -> dict[str, Path]:
    """Write report.json, tables.md, per-task pages and budget-curve files.

    ``reports`` may be empty when ``curves`` are given (agent logs only).
    """
    if curves and not reports:
        reports = []
    else:
        reports = _as_list(reports)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}

    data = {"reports": [r.to_dict() for r in reports],
            "curves": {b: [list(p) for p in pts] for b, pts in (curves or {}).items()}}
    written["json"] = out / "report.json"
    written["json"].write_text(json.dumps(data, indent=2))

    sections = []
    if reports:
        sections += [
            "## Benchmark score (harmonic mean of per-task speedups)", score_table(reports),
            "## Tasks sped up (recorded speedup >= 1.1x)", sped_up_table(reports),
            "## Per-task speedup", per_task_table(reports),
            "## Reference timings", timing_table(reports),
        ]
    if curves:
        sections += ["## Dev-set score vs. budget", curve_table(curves)]
    written["tables"] = out / "tables.md"
    written["tables"].write_text("\n\n".join(sections) + "\n")

    pages = out / "tasks"
    pages.mkdir(exist_ok=True)
    for task_id in sorted({s.task_id for r in reports for s in r.task_scores}):
        lines = [f"# {task_id}", ""]
        for r in reports:
            s = next((s for s in r.task_scores if s.task_id == task_id), None)
            if s is None:
                continue
            raw = "n/a" if s.raw_speedup is None else f"{s.raw_speedup:.3f}x"
            lines += [f"## {r.backend}", "",
                      f"- recorded speedup: {s.recorded_speedup:.3f}x (raw {raw})",
                      f"- valid: {s.valid_fraction:.0%}, timeouts: {s.timeout_fraction:.0%}, "
                      f"invalid: {s.invalid_fraction:.0%}",
                      f"- reference total: {s.ref_total_ns / 1e6:.3f} ms, candidate total: {s.cand_total_ns / 1e6:.3f} ms",
                      f"- n = {s.n}, instances = {s.instance_count}", ""]
        (pages / f"{task_id}.md").write_text("\n".join(lines))
    written["pages"] = pages

    if curves:
        written["curve_csv"] = out / "budget_curve.csv"
        with written["curve_csv"].open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["backend", "budget", "score"])
            for b in sorted(curves):
                for c, v in curves[b]:
                    w.writerow([b, c, v])
        if plot:
            png = _plot_curves(curves, out / "budget_curve.png")
            if png:
                written["curve_png"] = png
    return written


def _plot_curves(curves: Mapping, path: Path) -> Path | None:
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return None
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for backend in sorted(curves):
        xs = [c for c, _ in curves[backend]]
        ys = [v for _, v in curves[backend]]
        ax.step(xs, ys, where="post", label=backend)
    ax.set_xlabel("budget spent")
    ax.set_ylabel("dev-set score")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
