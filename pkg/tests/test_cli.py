import csv
import json

import pytest

from dgap.cli import OUTPUT_ENV, main, replay_records


@pytest.fixture
def out_env(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path))
    return tmp_path


@pytest.fixture(scope="module")
def empty_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert main(["--out", str(out), "run-scenario", "empty", "--seed", "1"]) == 0
    return out


def test_run_scenario_uses_env_output(out_env, capsys):
    assert main(["run-scenario", "empty"]) == 0
    assert capsys.readouterr().out.strip() == "success"
    for suffix in ("summary.json", "trace.csv", "plans.jsonl"):
        assert (out_env / f"empty_seed0_{suffix}").exists()
    summary = json.loads((out_env / "empty_seed0_summary.json").read_text())
    assert summary["outcome"] == "success" and summary["collisions"] == 0


def test_run_scenario_from_file(out_env, tmp_path, capsys):
    f = tmp_path / "short.yaml"
    f.write_text("name: short\nego: {start: [0, 0]}\ngoal: [1.5, 0]\ntime_limit: 10\n")
    assert main(["run-scenario", str(f), "--social-weight", "0.5"]) == 0
    assert capsys.readouterr().out.strip() == "success"
    assert (out_env / "short_seed0_trace.csv").exists()


def test_malformed_scenario_exits_2(tmp_path, capsys):
    f = tmp_path / "bad.yaml"
    f.write_text("ego: [oops")
    assert main(["run-scenario", str(f)]) == 2
    assert "error" in capsys.readouterr().err
    assert main(["run-scenario", str(tmp_path / "missing.yaml")]) == 2


def test_config_override(out_env, tmp_path):
    good = tmp_path / "cfg.yaml"
    good.write_text("social_weight: 2.0\nhorizon: 4.0\n")
    assert main(["--config", str(good), "run-scenario", "empty"]) == 0
    bad = tmp_path / "bad.yaml"
    bad.write_text("no_such_key: 1\n")
    assert main(["--config", str(bad), "run-scenario", "empty"]) == 2
    assert main(["--config", str(bad), "monte-carlo", "--trials", "3"]) == 2


def test_replay_empty_csv(tmp_path, capsys):
    f = tmp_path / "blank_trace.csv"
    f.write_text("")
    assert main(["replay", str(f)]) == 0
    assert capsys.readouterr().out == ""


def test_replay_missing_exits_2(tmp_path, capsys):
    assert main(["replay", str(tmp_path / "nope.csv")]) == 2
    assert "not found" in capsys.readouterr().err


def test_replay_scenario_trace_matches_plans(empty_run):
    trace = empty_run / "empty_seed1_trace.csv"
    plans = [json.loads(line) for line in (empty_run / "empty_seed1_plans.jsonl").read_text().splitlines()]
    rows = list(csv.DictReader(trace.open()))
    recs = list(replay_records(trace))
    assert len(recs) == len(rows)
    assert [r["row"] for r in recs] == rows
    for rec in recs:
        k = rec["plan_index"]
        if k >= 0:
            assert plans[k]["t"] <= float(rec["row"]["t"]) + 1e-9
            assert len(rec["gaps"]) == len(plans[k]["gaps"])
    assert {r["plan_index"] for r in recs} >= set(range(len(plans)))


def test_replay_dump_to_file(empty_run, tmp_path):
    dump = tmp_path / "dump.jsonl"
    assert main(["replay", str(empty_run / "empty_seed1_trace.csv"), "-o", str(dump)]) == 0
    lines = dump.read_text().splitlines()
    assert json.loads(lines[0])["frame"] == 0


def test_monte_carlo_tally_and_replay(out_env, capsys):
    assert main(["monte-carlo", "--trials", "40", "--seed", "2"]) == 0
    tally = json.loads(capsys.readouterr().out)
    assert sum(tally.values()) == 40
    log = out_env / "montecarlo_seed2_trials.jsonl"
    recs = list(replay_records(log))
    assert len(recs) == 40
    for rec in recs:
        assert len(rec["gap"]) == 2
        if rec["outcome"] != "speed_infeasible":
            assert rec["rollout"][0] == [0.0, 0.0] and len(rec["rollout"]) == 2


def test_monte_carlo_rejects_zero_trials(out_env):
    assert main(["monte-carlo", "--trials", "0"]) == 2
