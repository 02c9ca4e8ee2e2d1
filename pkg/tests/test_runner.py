import json

from pogoswarm.core import World
from pogoswarm.metrics import read_metrics_csv
from pogoswarm.runner import commands_from_trace, replay_to_digest, run_headless
from pogoswarm.scenario import parse_scenario
from pogoswarm.trace import load_trace, trace_digest


def config_from(raw):
    base = {"arena": {"rect": [1.0, 1.0]}, "seed": 21, "duration": 1.0,
            "robots": {"count": 3, "program": "flood", "spacing": 0.2,
                       "params": {"p": 0.5}}}
    base.update(raw)
    return parse_scenario(json.dumps(base))


class TestRunHeadless:
    def test_runs_to_duration_and_reports(self, tmp_path):
        trace = tmp_path / "run.jsonl"
        result = run_headless(config_from({}), trace_path=str(trace))
        assert result.ticks == 1000
        assert result.wall_seconds >= 0.0
        assert len(result.digest) == 16
        loaded, truncated = load_trace(str(trace))
        assert not truncated
        assert trace_digest(loaded) == result.digest
        assert len(loaded) == result.trace_lines

    def test_zero_duration_run_is_bookkeeping_only(self, tmp_path):
        trace = tmp_path / "empty.jsonl"
        result = run_headless(config_from({"duration": 0.0}),
                              trace_path=str(trace))
        assert result.ticks == 0
        records, _truncated = load_trace(str(trace))
        assert records and all(r["kind"] == "meta" for r in records)

    def test_same_config_same_digest(self):
        config = config_from({})
        assert run_headless(config).digest == run_headless(config).digest

    def test_metrics_file_written(self, tmp_path):
        out = tmp_path / "m.csv"
        run_headless(config_from({}), metrics_path=str(out))
        rows = read_metrics_csv(str(out))
        assert {r.name for r in rows} >= {"delivered_frames", "dropped_frames"}

    def test_script_commands_take_effect(self):
        config = config_from({
            "script": [{"at": 0.1, "type": "swap_program",
                        "payload": {"ids": [0, 1, 2], "program": "idle"}}]})
        result = run_headless(config, keep_records=True)
        swaps = [r for r in result.world.writer.records
                 if r["kind"] == "program_swap"]
        assert len(swaps) == 3
        assert all(s["data"]["origin"] == "script" for s in swaps)


class TestCommandRecovery:
    def test_script_round_trips_through_the_trace(self):
        script = [{"at": 0.05, "type": "emit_signal", "payload": {"code": 4}},
                  {"at": 0.20, "type": "swap_program",
                   "payload": {"ids": [0], "program": "idle"}}]
        result = run_headless(config_from({"script": script}),
                              keep_records=True)
        recovered = commands_from_trace(result.world.writer.records)
        assert recovered == [
            (50, {"type": "emit_signal", "payload": {"code": 4}}),
            (200, {"type": "swap_program",
                   "payload": {"ids": [0], "program": "idle"}}),
        ]

    def test_pacing_markers_are_recovered_too(self):
        config = config_from({})
        world = World(config, keep_records=True)
        world.run(10)
        world.apply_command({"type": "pause", "payload": {}})
        world.run(5)
        world.close()
        assert commands_from_trace(world.writer.records) == [
            (10, {"type": "pause", "payload": {}})]


class TestReplayToDigest:
    def test_replay_matches_interactive_session(self):
        config = config_from({})
        live = World(config)
        live.run(120)
        live.apply_command({"type": "emit_signal", "payload": {"code": 7}})
        live.run(380)
        live_digest = live.close()

        script = [(120, {"type": "emit_signal", "payload": {"code": 7}})]
        assert replay_to_digest(config, 500, script) == live_digest

    def test_commands_after_the_last_step_still_replay(self):
        # an operator can issue commands while paused at the end of a session
        config = config_from({})
        live = World(config)
        live.run(100)
        live.apply_command({"type": "emit_signal", "payload": {"code": 1}})
        live.apply_command({"type": "pause", "payload": {}})
        live_digest = live.close()

        script = [(100, {"type": "emit_signal", "payload": {"code": 1}}),
                  (100, {"type": "pause", "payload": {}})]
        assert replay_to_digest(config, 100, script) == live_digest

    def test_full_loop_from_trace_file(self, tmp_path):
        trace = tmp_path / "live.jsonl"
        config = config_from({})
        live = World(config, trace_path=str(trace))
        live.run(40)
        live.apply_command({"type": "swap_program",
                            "payload": {"ids": [1], "program": "forward"}})
        live.run(200)
        live_digest = live.close()

        records, truncated = load_trace(str(trace))
        assert not truncated
        assert trace_digest(records) == live_digest
        script = commands_from_trace(records)
        assert replay_to_digest(config, 240, script) == live_digest
