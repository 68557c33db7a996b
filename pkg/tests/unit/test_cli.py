from __future__ import annotations

import json

import pytest

from reachavoid.cli import EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_OK, main

SCENARIO = {
    "dimension": 2,
    "domain": {"shape": "box", "lower": [-5, -5], "upper": [5, 5]},
    "target": {"shape": "ball", "center": [0, 3], "radius": 1},
    "defenders": [{"position": [0, 2], "max_speed": 1, "capture_radius": 0.5}],
    "attackers": [{"position": [0, -2], "max_speed": 1}],
    "dt": 0.05,
    "allocation_period": 0.1,
    "t_max": 5,
}


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "duel.json"
    path.write_text(json.dumps(SCENARIO))
    return path


def test_simulate(scenario_file, tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", str(scenario_file), "--out-dir", str(out)]) == EXIT_OK
    summary = json.loads((out / "summary.json").read_text())
    assert summary["outcome"] == "DefenseSuccessCapture"
    assert (out / "trace.csv").is_file()


def test_simulate_overrides(scenario_file, tmp_path):
    out = tmp_path / "sim"
    code = main(["simulate", str(scenario_file), "--out-dir", str(out), "--t-max", "0.2", "--defense", "none"])
    assert code == EXIT_OK
    summary = json.loads((out / "summary.json").read_text())
    assert summary["termination_reason"] == "Timeout"
    assert summary["steps"] == 4


def test_configuration_errors_exit_with_2(tmp_path, scenario_file):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({**SCENARIO, "attackers": [{"position": [0, -2], "max_speed": 3}]}))
    assert main(["simulate", str(bad)]) == EXIT_CONFIG
    assert main(["simulate", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    assert main(["bench", str(scenario_file), "--preset", "single-2d"]) == EXIT_CONFIG
    assert main(["bench", "--preset", "nope"]) == EXIT_CONFIG


def test_bench_preset(tmp_path):
    out = tmp_path / "bench"
    code = main(
        [
            "bench",
            "--preset",
            "single-2d",
            "--trials",
            "2",
            "--t-max",
            "0.3",
            "--dt",
            "0.1",
            "--defense",
            "mdea",
            "--defense",
            "initial",
            "--out-dir",
            str(out),
        ]
    )
    assert code in (EXIT_OK, EXIT_CHECK_FAILED)
    summary = json.loads((out / "summary.json").read_text())
    assert summary["trials"] == 2
    assert len(summary["tallies"]) == 2


def test_srs(scenario_file, tmp_path):
    out = tmp_path / "srs"
    assert main(["srs", str(scenario_file), "--coalition", "1", "--out-dir", str(out)]) == EXIT_OK
    assert (out / "srs-attacker1.svg").is_file()


def test_verify(scenario_file):
    assert main(["verify", str(scenario_file), "--points", "200"]) == EXIT_OK
