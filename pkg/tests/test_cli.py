"""CLI harness: run, sweep, replay; determinism and exit codes."""

from __future__ import annotations

import json

import pytest

from rco.backend import ScriptedBackend
from rco.cli import bundled_scenario_dir, main
from rco.runner import Mode, Overrides, run_episode
from rco.simenv import Scenario


def scenario_path(name: str) -> str:
    return str(bundled_scenario_dir() / f"{name}.json")


class TestBundledLibrary:
    def test_at_least_eight_scenarios(self):
        files = sorted(bundled_scenario_dir().glob("*.json"))
        assert len(files) >= 8

    def test_each_deficit_class_covered_benign_and_hazardous(self):
        by_class = {}
        for f in sorted(bundled_scenario_dir().glob("*.json")):
            sc = Scenario.load(str(f))
            for cls in sc.deficit_policy.classes:
                by_class.setdefault(cls.value, []).append(sc.name)
        for cls in ("traffic_light", "stop_sign", "pedestrian", "bicycle"):
            assert len(by_class.get(cls, [])) >= 2, f"need benign+hazardous for {cls}"

    def test_scenarios_load_and_validate(self):
        for f in sorted(bundled_scenario_dir().glob("*.json")):
            sc = Scenario.load(str(f))
            assert sc.time_limit_ticks > 0
            assert sc.route.length > 0


class TestRunCommand:
    def test_run_writes_results_and_summary(self, tmp_path):
        out = tmp_path / "out"
        code = main([
            "run", "--scenarios", scenario_path("pedestrian_cross"),
            "--mode", "baseline", "--backend", "scripted", "--out", str(out),
        ])
        assert code == 0
        result = json.loads((out / "pedestrian_cross__baseline.result.json").read_text())
        assert result["rc"] == 100.0
        assert any(e["kind"] == "collision_pedestrian" for e in result["infractions"])
        assert (out / "summary.csv").exists()
        assert (out / "pedestrian_cross__baseline.decisions.jsonl").exists()

    def test_decision_log_is_jsonl_with_schema(self, tmp_path):
        out = tmp_path / "out"
        main([
            "run", "--scenarios", scenario_path("traffic_light_benign"),
            "--mode", "rco", "--out", str(out),
        ])
        lines = (out / "traffic_light_benign__rco.decisions.jsonl").read_text().splitlines()
        assert lines
        for line in lines:
            rec = json.loads(line)
            assert rec["schema"] == 1
            assert "action" in rec

    def test_same_command_twice_is_byte_identical(self, tmp_path):
        args = ["run", "--mode", "rco", "--backend", "scripted", "--seed", "7"]
        main(args + ["--out", str(tmp_path / "a")])
        main(args + ["--out", str(tmp_path / "b")])
        a = (tmp_path / "a" / "summary.csv").read_bytes()
        b = (tmp_path / "b" / "summary.csv").read_bytes()
        assert a == b

    def test_missing_scenario_path_is_config_error(self, tmp_path):
        code = main(["run", "--scenarios", str(tmp_path / "nope"), "--out", str(tmp_path / "o")])
        assert code == 2

    def test_bad_override_is_config_error(self, tmp_path):
        code = main([
            "run", "--scenarios", scenario_path("pedestrian_cross"),
            "--n-max", "-3", "--out", str(tmp_path / "o"),
        ])
        assert code == 2

    def test_config_file_with_flag_precedence(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"n_max": 2, "wait_cap": 10}))
        out = tmp_path / "out"
        code = main([
            "run", "--scenarios", scenario_path("traffic_light_benign"),
            "--mode", "rco", "--config", str(cfg), "--n-max", "4", "--out", str(out),
        ])
        assert code == 0
        # flag wins over file: sequences never exceed 4 pairs
        lines = (out / "traffic_light_benign__rco.decisions.jsonl").read_text().splitlines()
        max_seq = max(json.loads(l)["sequence_len"] for l in lines)
        assert max_seq <= 4

    def test_unknown_config_key_rejected(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"warp_speed": 9}))
        code = main([
            "run", "--scenarios", scenario_path("pedestrian_cross"),
            "--config", str(cfg), "--out", str(tmp_path / "o"),
        ])
        assert code == 2

    def test_parallel_jobs_match_sequential(self, tmp_path):
        scenarios = [scenario_path("pedestrian_cross"), scenario_path("bicycle_cross")]
        main(["run", "--scenarios", *scenarios, "--mode", "baseline",
              "--out", str(tmp_path / "seq"), "--jobs", "1"])
        main(["run", "--scenarios", *scenarios, "--mode", "baseline",
              "--out", str(tmp_path / "par"), "--jobs", "2"])
        assert (tmp_path / "seq" / "summary.csv").read_bytes() == (
            tmp_path / "par" / "summary.csv"
        ).read_bytes()


class TestSweepCommand:
    def test_sweep_table_shape(self, tmp_path):
        out = tmp_path / "out"
        code = main([
            "sweep", "--scenarios", scenario_path("traffic_light_benign"),
            "--limits", "1,3,5,8", "--out", str(out),
        ])
        assert code == 0
        lines = (out / "sweep.csv").read_text().strip().split("\n")
        assert lines[0] == "n_max,rc,is,ds,delta_rc,delta_is,delta_ds"
        assert len(lines) == 5
        assert [l.split(",")[0] for l in lines[1:]] == ["1", "3", "5", "8"]

    def test_benign_scenario_ds_not_worse_with_plan_ahead(self, tmp_path):
        out = tmp_path / "out"
        main([
            "sweep", "--scenarios", scenario_path("traffic_light_benign"),
            "--limits", "1,5", "--out", str(out),
        ])
        rows = {}
        for line in (out / "sweep.csv").read_text().strip().split("\n")[1:]:
            parts = line.split(",")
            rows[int(parts[0])] = float(parts[3])  # ds
        assert rows[5] >= rows[1]

    def test_stale_plan_long_limit_degrades_infractions(self, tmp_path):
        out = tmp_path / "out"
        main([
            "sweep", "--scenarios", scenario_path("stale_plan"),
            "--limits", "5,12", "--out", str(out),
        ])
        rows = {}
        for line in (out / "sweep.csv").read_text().strip().split("\n")[1:]:
            parts = line.split(",")
            rows[int(parts[0])] = float(parts[2])  # is
        assert rows[12] < rows[5]

    def test_empty_limits_rejected(self, tmp_path):
        code = main(["sweep", "--limits", ",", "--out", str(tmp_path / "o")])
        assert code == 2


class TestReplayCommand:
    def test_replay_renders_trace(self, tmp_path, capsys):
        out = tmp_path / "out"
        main([
            "run", "--scenarios", scenario_path("pedestrian_cross"),
            "--mode", "rco", "--out", str(out),
        ])
        capsys.readouterr()
        code = main(["replay", "--log", str(out / "pedestrian_cross__rco.decisions.jsonl")])
        assert code == 0
        text = capsys.readouterr().out
        assert "tick" in text
        assert "throttle=" in text

    def test_missing_log_is_config_error(self, tmp_path):
        assert main(["replay", "--log", str(tmp_path / "missing.jsonl")]) == 2


class TestAlwaysStopMode:
    def test_always_stop_halts_on_first_deficit(self):
        sc = Scenario.load(scenario_path("pedestrian_cross"))
        out = run_episode(sc, Mode.ALWAYS_STOP, ScriptedBackend.bundled(), Overrides())
        assert out.result.rc == pytest.approx(0.0, abs=1.0)
        assert out.result.infractions == ()
