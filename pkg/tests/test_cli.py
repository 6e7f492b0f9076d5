import csv
import json
from pathlib import Path

import pytest

from holdlab.harness import RunManifest
from holdlab.harness.cli import main
from holdlab.harness.scenarios import load_scenario

from conftest import tiny_scenario

FIXTURE = Path(__file__).parent / "fixtures" / "evolve_gate.json"


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "tiny.json"
    tiny_scenario().to_json(path)
    return str(path)


def test_gen_scenario(tmp_path, capsys):
    out = tmp_path / "gen"
    assert main(["gen-scenario", "--seed", "7", "--out", str(out), "--lines", "2", "3"]) == 0
    sc = load_scenario(str(out / "scenario.json"))
    assert 2 <= len(sc.lines) <= 3
    man = RunManifest.read(out / "manifest.json")
    assert man.status == "ok" and man.artifacts == ["scenario.json"] and man.seeds == [7]


def test_evaluate_ten_seeds(tmp_path, capsys):
    out = tmp_path / "eval"
    assert main(["evaluate", "--scenario", "builtin:case1", "--controller", "feedback", "--seeds", "1..10",
                 "--out", str(out)]) == 0
    rows = list(csv.DictReader((out / "metrics.csv").open()))
    per_seed = [r for r in rows if r["status"] == "ok"]
    assert [int(r["seed"]) for r in per_seed] == list(range(1, 11))
    assert [r["seed"] for r in rows[-2:]] == ["mean", "sd"]
    agg = json.loads((out / "aggregate.json").read_text())
    assert agg["n_ok"] == 10 and agg["failed_seeds"] == []
    assert "±" in capsys.readouterr().out


def test_train_two_episodes(tmp_path, scenario_file):
    out = tmp_path / "train"
    assert main(["train", "--scenario", scenario_file, "--episodes", "2", "--updates", "5", "--out", str(out)]) == 0
    evol = json.loads((out / "evol.json").read_text())
    assert len(evol["total_rewards"]) == 2
    man = RunManifest.read(out / "manifest.json")
    assert set(man.artifacts) == {"checkpoint.npz", "reward.reward", "evol.json", "test_metrics.json"}

    # the checkpoint drives the rl: controller
    sim = tmp_path / "sim"
    assert main(["simulate", "--scenario", scenario_file, "--controller", f"rl:{out / 'checkpoint.npz'}",
                 "--out", str(sim)]) == 0
    assert (sim / "metrics.json").exists()


def test_simulate_event_log(tmp_path, scenario_file, capsys):
    out = tmp_path / "sim"
    assert main(["simulate", "--scenario", scenario_file, "--controller", "feedback", "--events", "--check",
                 "--seed", "4", "--out", str(out)]) == 0
    lines = (out / "events.ndjson").read_text().splitlines()
    assert lines and all("kind" in json.loads(x) for x in lines[:20])
    flat = json.loads(capsys.readouterr().out)
    assert flat["avg_travel_time"] > 0


def test_usage_error_exits_2():
    with pytest.raises(SystemExit) as info:
        main(["bogus"])
    assert info.value.code == 2


def test_runtime_error_exits_1(tmp_path, capsys):
    out = tmp_path / "bad"
    assert main(["simulate", "--controller", "nonsense", "--out", str(out)]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ValueError"
    man = RunManifest.read(out / "manifest.json")
    assert man.status == "failed"


def test_missing_reward_file_exits_1(tmp_path, scenario_file, capsys):
    assert main(["train", "--scenario", scenario_file, "--reward", str(tmp_path / "none.reward"),
                 "--out", str(tmp_path / "t")]) == 1
    assert json.loads(capsys.readouterr().err)["error"] == "FileNotFoundError"


def test_evolve_with_replay(tmp_path, scenario_file, capsys):
    out = tmp_path / "evo"
    assert main(["evolve", "--scenario", scenario_file, "--provider", f"replay:{FIXTURE}", "--iterations", "1",
                 "--episodes", "2", "--updates", "5", "--criterion-slack", "100", "--out", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["iterations"] == 2 and summary["provider"] == "replay"
    assert (out / "iterations/iter_01.json").exists()
    assert json.loads((out / "manifest.json").read_text())["status"] == "ok"


def test_evolve_exhausted_fixture_exits_1(tmp_path, scenario_file, capsys):
    out = tmp_path / "evo"
    assert main(["evolve", "--scenario", scenario_file, "--provider", f"replay:{FIXTURE}", "--iterations", "5",
                 "--episodes", "1", "--updates", "1", "--criterion-slack", "100", "--out", str(out)]) == 1
    assert json.loads(capsys.readouterr().err)["error"] == "ProviderError"
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "failed" and man["kind"] == "evolve"
