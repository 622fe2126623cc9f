import json

import pytest

from optforge.cli import main
from optforge.config import ConfigError, HarnessConfig
from optforge.results import read_results
from optforge.seed_tasks import write_reference_candidates

from conftest import CONSTANT_TASK, SUM_TASK, write_task

FAST = {"test_count": 4, "repeats": 2, "timing_runs": 1, "dev_count": 4, "qa_instances": 2,
        "qa_solver_seeds": [0, 1]}


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(FAST))
    return str(path)


def linear_clock(task):
    return lambda n: n * 1e-6


# -- config ----------------------------------------------------------------

def test_config_load_and_overrides(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"repeats": 3, "tasks": ["a", "b"], "qa_solver_seeds": [4, 5]}))
    cfg = HarnessConfig.load(path, {"out": "x", "sizes": None})
    assert (cfg.repeats, cfg.tasks, cfg.qa_solver_seeds, cfg.out) == (3, ("a", "b"), (4, 5), "x")
    assert cfg.config_hash() == HarnessConfig.load(path, {"out": "x"}).config_hash()
    assert cfg.config_hash() != cfg.with_overrides(repeats=4).config_hash()
    assert cfg.limits().mem_limit == 14 * 1024 ** 3


@pytest.mark.parametrize("data", [
    {"nope": 1},
    {"repeats": 0},
    {"target_time": 0},
    {"budget": -1},
    {"backend": "carrier-pigeon"},
    {"test_seed_base": 50},
    {"speedup_mode": "vibes"},
])
def test_config_rejects_bad_values(tmp_path, data):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(data))
    with pytest.raises(ConfigError):
        HarnessConfig.load(path)


def test_config_unreadable(tmp_path):
    (tmp_path / "c.json").write_text("{not json")
    with pytest.raises(ConfigError):
        HarnessConfig.load(tmp_path / "c.json")


# -- validate --------------------------------------------------------------

def test_validate_seed_bundle_passes(cfg_file, tmp_path, capsys):
    assert main(["validate", "--config", cfg_file, "--out", str(tmp_path / "o")]) == 0
    out = capsys.readouterr().out
    assert "6/6 tasks passed" in out
    qa = list(read_results(tmp_path / "o" / "results.jsonl", "qa"))
    assert len(qa) == 6 and all(r["passed"] for r in qa)


def test_validate_flags_constant_task(cfg_file, tmp_path, capsys):
    bundle = tmp_path / "b"
    write_task(bundle, "constant", CONSTANT_TASK)
    assert main(["validate", "--config", cfg_file, "--bundle", str(bundle), "--out", str(tmp_path / "o")]) == 1
    assert "FAIL  constant" in capsys.readouterr().out


def test_missing_bundle_and_unknown_task_are_usage_errors(tmp_path, capsys):
    assert main(["validate", "--bundle", str(tmp_path / "missing")]) == 2
    assert main(["validate", "--tasks", "no_such_task", "--out", str(tmp_path)]) == 2
    assert "unknown task" in capsys.readouterr().err


# -- calibrate -------------------------------------------------------------

def test_calibrate_writes_deterministic_manifest(tmp_path):
    out = tmp_path / "o"
    assert main(["calibrate", "--out", str(out)], measure_factory=linear_clock) == 0
    first = (out / "sizes.json").read_text()
    manifest = json.loads(first)
    assert len(manifest["sizes"]) == 6
    assert set(manifest["sizes"].values()) == {99914}
    assert main(["calibrate", "--out", str(out)], measure_factory=linear_clock) == 0
    assert (out / "sizes.json").read_text() == first
    assert len(list(read_results(out / "results.jsonl", "calibration"))) == 12


def test_calibrate_rejects_bad_target(tmp_path):
    assert main(["calibrate", "--target-time", "0", "--out", str(tmp_path)]) == 2
    assert main(["calibrate", "--target-time", "-1", "--out", str(tmp_path)]) == 2


# -- evaluate --------------------------------------------------------------

def sizes_file(tmp_path, n=300):
    path = tmp_path / "sizes.json"
    path.write_text(json.dumps({"sizes": {"sum_task": n}}))
    return str(path)


def test_evaluate_reference_copies(cfg_file, tmp_path, capsys):
    cand = tmp_path / "cand"
    write_reference_candidates(cand)
    out = tmp_path / "o"
    assert main(["evaluate", "--config", cfg_file, "--candidate", str(cand), "--out", str(out),
                 "--tasks", "wasserstein_dist,psd_cone_projection", "--label", "copies"]) == 0
    (report,) = read_results(out / "results.jsonl", "report")
    assert report["metadata"]["backend"] == "copies"
    assert 0.5 < report["aggregate_score"] < 2.0
    scores = list(read_results(out / "results.jsonl", "task_score"))
    assert all(s["valid_fraction"] == 1.0 for s in scores)


def test_evaluate_invalid_candidate_scores_one(cfg_file, tmp_path):
    bundle = tmp_path / "b"
    write_task(bundle, "sum_task", SUM_TASK)
    cand = tmp_path / "cand"
    cand.mkdir()
    (cand / "solver.py").write_text("class Solver:\n    def solve(self, problem):\n        return -1\n")
    out = tmp_path / "o"
    assert main(["evaluate", "--config", cfg_file, "--bundle", str(bundle), "--candidate", str(cand),
                 "--out", str(out), "--sizes", sizes_file(tmp_path)]) == 0
    (score,) = read_results(out / "results.jsonl", "task_score")
    assert score["valid_fraction"] == 0.0
    assert score["recorded_speedup"] == 1.0


def test_evaluate_empty_candidate_is_build_failure(cfg_file, tmp_path, capsys):
    bundle = tmp_path / "b"
    write_task(bundle, "sum_task", SUM_TASK)
    cand = tmp_path / "cand"
    (cand / "sum_task").mkdir(parents=True)
    assert main(["evaluate", "--config", cfg_file, "--bundle", str(bundle), "--candidate", str(cand),
                 "--out", str(tmp_path / "o"), "--sizes", sizes_file(tmp_path)]) == 1
    assert "build error" in capsys.readouterr().out
    assert main(["evaluate", "--candidate", str(tmp_path / "nowhere"), "--bundle", str(bundle)]) == 2


# -- agent and report ------------------------------------------------------

SOLVER_EDIT = ("```\nedit\nfile: solver.py\nlines: 0-0\n---\nclass Solver:\n    def solve(self, problem):\n"
               "        return sum(problem)\n---\n```")


def agent_args(cfg_file, tmp_path, script, out):
    bundle = tmp_path / "b"
    if not bundle.exists():
        write_task(bundle, "sum_task", SUM_TASK)
    path = tmp_path / "script.json"
    path.write_text(json.dumps(script))
    return ["agent", "--config", cfg_file, "--bundle", str(bundle), "--task", "sum_task", "--out", str(out),
            "--script", str(path), "--cost-per-turn", "0.25", "--sizes", sizes_file(tmp_path)]


def event_log(out):
    # later snapshots depend on timing noise; the first valid edit always snapshots
    events = list(read_results(out / "results.jsonl", "agent_event"))
    first = next(i for i, e in enumerate(events) if e["event"] == "snapshot")
    return [(e["event"], e.get("spent"), e.get("reason")) for i, e in enumerate(events)
            if e["event"] != "snapshot" or i == first]


def test_agent_scripted_run_is_deterministic(cfg_file, tmp_path):
    script = {"turns": ["```\nls\n```", SOLVER_EDIT, "```\neval\n```"]}
    logs = []
    for run in ("o1", "o2"):
        out = tmp_path / run
        assert main(agent_args(cfg_file, tmp_path, script, out) + ["--no-score"]) == 0
        logs.append(event_log(out))
    assert logs[0] == logs[1]
    assert ("snapshot", 0.5, None) in logs[0]
    assert logs[0][-1] == ("terminated", 0.75, "backend_stop")


def test_agent_empty_submission_scores_one(cfg_file, tmp_path):
    out = tmp_path / "o"
    assert main(agent_args(cfg_file, tmp_path, {"turns": ["just thinking"]}, out)) == 0
    (score,) = read_results(out / "results.jsonl", "task_score")
    assert score["recorded_speedup"] == 1.0
    assert score["build_error"]


def test_agent_usage_errors(cfg_file, tmp_path):
    args = agent_args(cfg_file, tmp_path, {"turns": []}, tmp_path / "o")
    assert main(args[:args.index("--task")] + ["--task", "ghost"] + args[args.index("--task") + 2:]) == 2
    assert main(["agent", "--task", "wasserstein_dist", "--out", str(tmp_path / "o")]) == 2
    assert main(["agent", "--task", "wasserstein_dist", "--backend", "http", "--out", str(tmp_path / "o")]) == 2
    assert main(args + ["--budget", "0"]) == 2


def test_report_from_agent_run(cfg_file, tmp_path, capsys):
    out = tmp_path / "o"
    main(agent_args(cfg_file, tmp_path, {"turns": ["```\nls\n```", SOLVER_EDIT]}, out))
    capsys.readouterr()
    assert main(["report", "--out", str(out), "--no-plot", "--checkpoints", "0,0.25,0.5,1"]) == 0
    text = capsys.readouterr().out
    assert "| Score |" in text
    assert "| Pct. of Tasks Sped Up |" in text
    assert "| Budget | scripted |" in text
    assert "| 0.25 | 1.000 |" in text
    assert (out / "report" / "budget_curve.csv").exists()


def test_report_missing_results(tmp_path):
    assert main(["report", "--out", str(tmp_path)]) == 2
