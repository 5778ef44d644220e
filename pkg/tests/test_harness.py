import json
from pathlib import Path

import pytest

from proxyhand import cli
from proxyhand.harness import ScenarioError, bench, replay_recording, run_script

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
SCENARIOS = sorted((FIXTURES / "scenarios").glob("*.json"))


@pytest.mark.parametrize("path", SCENARIOS, ids=lambda p: p.stem)
def test_shipped_scenarios_pass(path):
    report = run_script(path)
    detail = [(c.description, c.detail) for c in report.checks if not c.passed]
    assert report.passed, detail


def test_script_mode_deterministic():
    path = FIXTURES / "scenarios" / "put_apple_into_basket.json"
    a = run_script(path)
    b = run_script(path)
    assert a.frames == b.frames
    assert a.interactions == b.interactions
    assert a.sim_ms == b.sim_ms


def test_missing_scenario_file():
    with pytest.raises(ScenarioError):
        run_script("no/such/scenario.json")


def test_bench_reports_percentiles():
    corpus = json.loads((FIXTURES / "bench_commands.json").read_text())
    corpus["priority"] = corpus["priority"][:10]
    corpus["grammar"] = corpus["grammar"][:5]
    stats = bench(corpus)
    assert set(stats) == {"priority", "grammar", "end_to_end"}
    for section in stats.values():
        assert section["p50_ms"] <= section["p95_ms"] <= section["max_ms"]


def test_bench_empty_corpus():
    with pytest.raises(ScenarioError):
        bench({})


class TestCli:
    def test_script_pass_exit_zero(self, capsys):
        rc = cli.main(["script",
                       str(FIXTURES / "scenarios" / "grab_apple.json")])
        assert rc == 0
        assert "PASS" in capsys.readouterr().out

    def test_script_json_output(self, capsys):
        rc = cli.main(["script", "--json",
                       str(FIXTURES / "scenarios" / "grab_apple.json")])
        assert rc == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["passed"] is True

    def test_script_failure_exit_code(self, tmp_path, capsys):
        doc = {
            "name": "impossible", "scene": "study_room",
            "commands": [{"t_ms": 0, "text": "grab the apple."}],
            "assertions": [{"check": "held_object", "value": "peach"}],
        }
        path = tmp_path / "impossible.json"
        path.write_text(json.dumps(doc))
        assert cli.main(["script", str(path)]) == 1

    def test_bad_scenario_is_config_error(self, tmp_path, capsys):
        assert cli.main(["script", str(tmp_path / "missing.json")]) == 2

    def test_bad_scene_path_is_config_error(self, tmp_path, capsys):
        rc = cli.main(["serve", "--scene", str(tmp_path / "nope.json"),
                       "--replay", "also-missing"])
        assert rc == 2

    def test_bad_fps_is_config_error(self, capsys):
        assert cli.main(["serve", "--fps", "500"]) == 2

    def test_bench_cli(self, capsys):
        rc = cli.main(["bench", str(FIXTURES / "bench_commands.json"), "--json"])
        assert rc == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["priority"]["count"] == 100

    def test_bench_missing_corpus(self, tmp_path, capsys):
        assert cli.main(["bench", str(tmp_path / "nope.json")]) == 2

    def test_bind_error_exit_code(self, capsys):
        import socket
        sock = socket.socket()
        sock.bind(("127.0.0.1", 0))
        port = sock.getsockname()[1]
        sock.listen(1)
        try:
            rc = cli.main(["serve", "--listen", f"127.0.0.1:{port}",
                           "--transport", "tcp-jsonl"])
            assert rc == 3
        finally:
            sock.close()


def test_replay_recording(tmp_path):
    record = tmp_path / "traffic.jsonl"
    entries = [
        {"dir": "in", "msg": {"type": "command_text", "seq": 1, "ts_ms": 0,
                              "payload": "grab the apple."}},
        {"dir": "out", "msg": {"type": "pong", "seq": 2, "ts_ms": 0,
                               "payload": None}},
    ]
    record.write_text("\n".join(json.dumps(e) for e in entries) + "\n")
    summary = replay_recording(record)
    assert summary["inbound"] == 1
    assert summary["state"]["held"] == "apple"
