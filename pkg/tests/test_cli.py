"""Exit codes, output formats, and flag plumbing for the command line."""

import dataclasses
import json
import subprocess
import sys

import pytest

from smshome.cli import main
from smshome.scenario import Scenario, demo_scenario


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestSend:
    def test_happy_path_prints_wire_ack_state(self, capsys):
        code, out, err = run_cli(capsys, "send", "Light On")
        assert code == 0
        assert "LON1E" in out
        assert "LIGHT 1 on" in out
        assert "ACKED_OK" in out

    def test_json_output_is_one_line(self, capsys):
        code, out, err = run_cli(capsys, "send", "Light On", "--format", "json")
        assert code == 0
        assert out.count("\n") == 1
        payload = json.loads(out)
        assert payload["wire"] == "LON1E"
        assert payload["ack"] == "LIGHT 1 on"
        assert payload["state"] == "ACKED_OK"
        light = [d for d in payload["devices"] if d["kind"] == "LIGHT"][0]
        assert light["relay_on"] is True

    def test_stuck_fan_reports_failure_ack(self, capsys):
        code, out, err = run_cli(capsys, "send", "Fan On", "--failure", "fan=stuck")
        assert code == 3
        assert "FAN 1 on 0" in out
        assert "ACKED_FAIL" in out

    def test_unrecognized_utterance_exits_2(self, capsys):
        code, out, err = run_cli(capsys, "send", "teapot on")
        assert code == 2
        assert out == ""
        assert "teapot" in err

    def test_total_loss_times_out_with_exit_3(self, capsys):
        code, out, err = run_cli(capsys, "send", "Light On", "--loss", "1.0",
                                 "--timeout", "10", "--retries", "1",
                                 "--format", "json")
        assert code == 3
        payload = json.loads(out)
        assert payload["state"] == "TIMED_OUT"
        assert payload["ack"] is None
        assert payload["attempts"] == 2

    def test_flaky_certain_failure_exits_3(self, capsys):
        code, out, err = run_cli(capsys, "send", "Light On",
                                 "--failure", "light=flaky:1.0")
        assert code == 3
        assert "LIGHT 1 on 0" in out

    def test_failure_flag_without_equals_rejected(self, capsys):
        code, out, err = run_cli(capsys, "send", "Fan On", "--failure", "fan")
        assert code == 2
        assert "device=mode" in err

    def test_failure_flag_unknown_device_rejected(self, capsys):
        code, out, err = run_cli(capsys, "send", "Fan On",
                                 "--failure", "toaster=stuck")
        assert code == 2

    def test_failure_flag_absent_device_index_rejected(self, capsys):
        code, out, err = run_cli(capsys, "send", "Fan On",
                                 "--failure", "fan2=stuck")
        assert code == 2
        assert "FAN2" in err

    def test_failure_flag_bad_mode_rejected(self, capsys):
        code, out, err = run_cli(capsys, "send", "Fan On",
                                 "--failure", "fan=wobbly")
        assert code == 2

    def test_unknown_flag_rejected_with_usage(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["send", "Light On", "--bogus"])
        assert exc.value.code == 2


class TestDemo:
    def test_writes_default_log_and_reports(self, capsys, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        code, out, err = run_cli(capsys, "demo", "--format", "json")
        assert code == 0
        payload = json.loads(out)
        assert payload["log"] == "run-seed42.jsonl"
        assert payload["records"] == 107
        assert set(payload["tickets"].values()) == {"ACKED_OK"}
        assert (tmp_path / "run-seed42.jsonl").exists()

    def test_stdout_is_deterministic(self, capsys, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        _, first, _ = run_cli(capsys, "demo", "--format", "json")
        _, second, _ = run_cli(capsys, "demo", "--format", "json")
        assert first == second

    def test_custom_log_path(self, capsys, tmp_path):
        target = tmp_path / "nested" / "demo.jsonl"
        code, out, err = run_cli(capsys, "demo", "--log", str(target))
        assert code == 0
        assert target.exists()
        assert len(target.read_text().splitlines()) == 107


class TestRun:
    def test_requires_scenario_file(self, capsys):
        code, out, err = run_cli(capsys, "run")
        assert code == 2
        assert "--scenario" in err

    def test_runs_scenario_file(self, capsys, tmp_path):
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(demo_scenario().to_dict()))
        log = tmp_path / "out.jsonl"
        code, out, err = run_cli(capsys, "run", "--scenario", str(path),
                                 "--log", str(log), "--format", "json")
        assert code == 0
        assert json.loads(out)["records"] == 107
        assert log.exists()

    def test_exit_0_even_when_tickets_fail(self, capsys, tmp_path):
        scenario = Scenario(script=[(0.0, "Light On")])
        scenario.sms = dataclasses.replace(scenario.sms, loss_prob=1.0)
        path = tmp_path / "lossy.json"
        path.write_text(json.dumps(scenario.to_dict()))
        code, out, err = run_cli(capsys, "run", "--scenario", str(path),
                                 "--log", str(tmp_path / "x.jsonl"),
                                 "--format", "json")
        assert code == 0
        assert set(json.loads(out)["tickets"].values()) == {"TIMED_OUT"}

    def test_bad_scenario_json_rejected(self, capsys, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        code, out, err = run_cli(capsys, "run", "--scenario", str(path))
        assert code == 2
        assert "JSON" in err

    def test_unknown_scenario_key_rejected(self, capsys, tmp_path):
        path = tmp_path / "extra.json"
        path.write_text(json.dumps({"seed": 1, "wibble": 2}))
        code, out, err = run_cli(capsys, "run", "--scenario", str(path))
        assert code == 2
        assert "wibble" in err


class TestReplay:
    @pytest.fixture
    def fresh_log(self, capsys, tmp_path):
        log = tmp_path / "demo.jsonl"
        run_cli(capsys, "demo", "--log", str(log))
        return log

    def test_fresh_log_matches(self, capsys, fresh_log):
        code, out, err = run_cli(capsys, "replay", str(fresh_log))
        assert code == 0
        assert "MATCHED" in out

    def test_tampered_log_exits_4(self, capsys, fresh_log):
        lines = fresh_log.read_text().splitlines()
        record = json.loads(lines[60])
        record["ts"] += 1.0
        lines[60] = json.dumps(record, sort_keys=True, separators=(",", ":"))
        fresh_log.write_text("\n".join(lines) + "\n")
        code, out, err = run_cli(capsys, "replay", str(fresh_log),
                                 "--format", "json")
        assert code == 4
        payload = json.loads(out)
        assert payload["matched"] is False
        assert payload["first_divergent_seq"] == 60

    def test_corrupt_log_exits_1(self, capsys, fresh_log):
        fresh_log.write_text("not json at all\n")
        code, out, err = run_cli(capsys, "replay", str(fresh_log))
        assert code == 1
        assert "corrupt" in err

    def test_missing_log_exits_1(self, capsys, tmp_path):
        code, out, err = run_cli(capsys, "replay", str(tmp_path / "nope.jsonl"))
        assert code == 1


class TestFuzz:
    def test_clean_run_exits_0(self, capsys):
        code, out, err = run_cli(capsys, "fuzz", "--iterations", "500",
                                 "--format", "json")
        assert code == 0
        payload = json.loads(out)
        assert payload["ok"] is True
        assert payload["iterations"] == 500

    def test_zero_iterations_rejected(self, capsys):
        code, out, err = run_cli(capsys, "fuzz", "--iterations", "0")
        assert code == 2

    def test_self_test_finds_planted_defect(self, capsys):
        code, out, err = run_cli(capsys, "fuzz", "--iterations", "500",
                                 "--self-test")
        assert code == 0
        assert "planted defect detected" in out


class TestServe:
    @pytest.fixture
    def fake_uvicorn(self, monkeypatch):
        calls = []

        def fake_run(app, **kwargs):
            calls.append((app, kwargs))

        monkeypatch.setattr("uvicorn.run", fake_run)
        return calls

    def test_defaults_to_realtime(self, capsys, tmp_path, fake_uvicorn):
        code, _, err = run_cli(capsys, "serve", "--runs-dir", str(tmp_path))
        assert code == 0
        app, kwargs = fake_uvicorn[0]
        assert kwargs["host"] == "127.0.0.1"
        assert kwargs["port"] == 8000
        assert app.state.host.world.scenario.run_mode == "realtime"

    def test_mode_flag_wins(self, capsys, tmp_path, fake_uvicorn):
        code, _, _ = run_cli(capsys, "serve", "--mode", "stepped",
                             "--runs-dir", str(tmp_path), "--port", "9001")
        assert code == 0
        app, kwargs = fake_uvicorn[0]
        assert kwargs["port"] == 9001
        assert app.state.host.world.scenario.run_mode == "stepped"

    def test_scenario_file_mode_respected(self, capsys, tmp_path, fake_uvicorn):
        path = tmp_path / "s.json"
        path.write_text(json.dumps({"run_mode": "stepped"}))
        code, _, _ = run_cli(capsys, "serve", "--scenario", str(path),
                             "--runs-dir", str(tmp_path))
        assert code == 0
        app, _ = fake_uvicorn[0]
        assert app.state.host.world.scenario.run_mode == "stepped"


class TestProcessLevel:
    def test_console_entry_exit_code(self):
        result = subprocess.run(
            [sys.executable, "-m", "smshome.cli", "send", "teapot on"],
            capture_output=True, text=True, timeout=60,
        )
        assert result.returncode == 2
        assert result.stdout == ""

    def test_console_entry_happy_send(self):
        result = subprocess.run(
            [sys.executable, "-m", "smshome.cli", "send", "Fan Off",
             "--format", "json"],
            capture_output=True, text=True, timeout=60,
        )
        assert result.returncode == 0
        assert json.loads(result.stdout)["wire"] == "FOFF1E"
