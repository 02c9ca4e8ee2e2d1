import json
import math

import pytest
from hypothesis import given, strategies as st

from pogoswarm.trace import (
    TraceWriter,
    canonical_json,
    load_trace,
    replay_snapshots,
    trace_digest,
)


class TestCanonicalJson:
    def test_keys_sorted(self):
        assert canonical_json({"b": 1, "a": 2}) == '{"a":2,"b":1}'

    def test_insertion_order_irrelevant(self):
        one = canonical_json({"x": 1.5, "y": [1, {"q": 2, "p": 3}]})
        two = canonical_json({"y": [1, {"p": 3, "q": 2}], "x": 1.5})
        assert one == two

    def test_negative_zero_collapses(self):
        assert canonical_json(-0.0) == canonical_json(0.0)

    def test_nine_significant_digits(self):
        assert canonical_json(math.pi) == "3.14159265"
        assert canonical_json(1.0 / 3.0) == "0.333333333"

    def test_small_integers_stay_exact(self):
        assert canonical_json(7) == "7"
        assert canonical_json(True) == "true"
        assert canonical_json(None) == "null"

    def test_bytes_become_hex(self):
        assert canonical_json({"p": b"\x01\xff"}) == '{"p":"01ff"}'

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            canonical_json(float("nan"))
        with pytest.raises(ValueError):
            canonical_json(float("inf"))

    def test_non_string_key_rejected(self):
        with pytest.raises(TypeError):
            canonical_json({1: "x"})

    @given(st.floats(allow_nan=False, allow_infinity=False, width=64))
    def test_output_parses_back_to_nine_digit_value(self, v):
        out = canonical_json(v)
        parsed = json.loads(out)
        assert parsed == float(format(v, ".9g"))

    @given(st.dictionaries(st.text(), st.integers(), max_size=5))
    def test_dicts_are_valid_json(self, d):
        assert json.loads(canonical_json(d)) == d


class TestTraceWriter:
    def test_records_sorted_by_phase_then_entity(self):
        w = TraceWriter(keep_records=True)
        w.add(0, 7, "pose", 2, {"x": 0.0, "y": 0.0, "theta": 0.0})
        w.add(0, 2, "led", 1, {"which": "head", "rgb": [1, 2, 3]})
        w.add(0, 7, "pose", 0, {"x": 0.0, "y": 0.0, "theta": 0.0})
        w.add(0, 7, "metric", None, {"delivered": 0, "dropped": 0})
        w.end_tick()
        order = [(r["phase"], r["entity"]) for r in w.records]
        assert order == [(2, 1), (7, None), (7, 0), (7, 2)]

    def test_none_entity_sorts_before_zero(self):
        w = TraceWriter(keep_records=True)
        w.add(3, 1, "meta", None, {"event": "command"})
        w.add(3, 1, "signal", 0, {"code": 1, "origin": "script"})
        w.end_tick()
        assert [r["entity"] for r in w.records] == [None, 0]

    def test_digest_matches_recomputation(self, tmp_path):
        path = tmp_path / "t.jsonl"
        w = TraceWriter(str(path), keep_records=True)
        w.add(0, 0, "meta", None, {"event": "start"})
        w.end_tick()
        w.add(1, 7, "pose", 0, {"x": 0.125, "y": -0.5, "theta": 0.0})
        w.end_tick()
        digest = w.close()
        assert trace_digest(w.records) == digest
        loaded, truncated = load_trace(str(path))
        assert not truncated
        assert trace_digest(loaded) == digest

    def test_same_work_same_bytes(self, tmp_path):
        def build(path):
            w = TraceWriter(str(path))
            w.add(0, 7, "pose", 1, {"x": 1.0, "y": 2.0, "theta": 0.5})
            w.add(0, 7, "pose", 0, {"x": 0.0, "y": 0.0, "theta": 0.0})
            w.end_tick()
            return w.close()

        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        assert build(a) == build(b)
        assert a.read_bytes() == b.read_bytes()

    def test_kind_filter_keeps_meta(self):
        w = TraceWriter(keep_records=True, kinds=["pose"])
        w.add(0, 0, "meta", None, {"event": "start"})
        w.add(0, 5, "frame_tx", 0, {"seq": 0})
        w.add(0, 7, "pose", 0, {"x": 0.0, "y": 0.0, "theta": 0.0})
        w.end_tick()
        w.close()
        assert [r["kind"] for r in w.records] == ["meta", "pose"]

    def test_empty_tick_emits_nothing(self):
        w = TraceWriter(keep_records=True)
        w.end_tick()
        w.end_tick()
        assert w.records == []
        assert w.line_count == 0


class TestLoadTrace:
    def _write_lines(self, path, lines):
        path.write_text("".join(lines))

    def test_round_trip(self, tmp_path):
        path = tmp_path / "t.jsonl"
        w = TraceWriter(str(path), keep_records=True)
        for tick in range(3):
            w.add(tick, 7, "pose", 0, {"x": float(tick), "y": 0.0, "theta": 0.0})
            w.end_tick()
        w.close()
        loaded, truncated = load_trace(str(path))
        assert not truncated
        assert loaded == w.records

    def test_corrupt_tail_drops_final_tick(self, tmp_path):
        path = tmp_path / "t.jsonl"
        good0 = canonical_json({"tick": 0, "phase": 7, "kind": "pose",
                                "entity": 0, "data": {}})
        good1 = canonical_json({"tick": 1, "phase": 7, "kind": "pose",
                                "entity": 0, "data": {}})
        good1b = canonical_json({"tick": 1, "phase": 7, "kind": "pose",
                                 "entity": 1, "data": {}})
        self._write_lines(path, [good0 + "\n", good1 + "\n", good1b + "\n",
                                 '{"tick": 1, "kind": "po'])
        loaded, truncated = load_trace(str(path))
        assert truncated
        # tick 1 may be half written, so all of it goes
        assert [r["tick"] for r in loaded] == [0]

    def test_missing_trailing_newline_is_truncation(self, tmp_path):
        path = tmp_path / "t.jsonl"
        good = canonical_json({"tick": 0, "phase": 7, "kind": "pose",
                               "entity": 0, "data": {}})
        partial = canonical_json({"tick": 1, "phase": 7, "kind": "pose",
                                  "entity": 0, "data": {}})
        self._write_lines(path, [good + "\n", partial])  # no final newline
        loaded, truncated = load_trace(str(path))
        assert truncated
        assert [r["tick"] for r in loaded] == [0]

    def test_non_record_line_is_truncation(self, tmp_path):
        path = tmp_path / "t.jsonl"
        self._write_lines(path, ['[1,2,3]\n'])
        loaded, truncated = load_trace(str(path))
        assert truncated
        assert loaded == []


class TestReplaySnapshots:
    def test_views_accumulate_state(self):
        records = [
            {"tick": 0, "phase": 2, "kind": "led", "entity": 0,
             "data": {"which": "head", "rgb": [9, 9, 9]}},
            {"tick": 0, "phase": 7, "kind": "pose", "entity": 0,
             "data": {"x": 0.0, "y": 0.0, "theta": 0.0}},
            {"tick": 5, "phase": 2, "kind": "program_swap", "entity": 0,
             "data": {"program": "idle", "origin": "shower"}},
            {"tick": 10, "phase": 7, "kind": "pose", "entity": 0,
             "data": {"x": 1.0, "y": 0.0, "theta": 0.0}},
        ]
        views = list(replay_snapshots(records))
        assert [v["tick"] for v in views] == [0, 10]
        assert views[0]["poses"]["0"]["x"] == 0.0
        assert views[0]["leds"]["0"]["head"] == [9, 9, 9]
        assert views[0]["programs"] == {}
        # swap at tick 5 shows up in the next emitted view
        assert views[1]["programs"] == {"0": "idle"}
        assert views[1]["poses"]["0"]["x"] == 1.0

    def test_ticks_without_poses_emit_nothing(self):
        records = [
            {"tick": 3, "phase": 5, "kind": "frame_tx", "entity": 0,
             "data": {"seq": 0}},
        ]
        assert list(replay_snapshots(records)) == []

    def test_views_serialize_canonically(self):
        records = [
            {"tick": 0, "phase": 7, "kind": "pose", "entity": 4,
             "data": {"x": 0.5, "y": 0.5, "theta": 0.0}},
        ]
        for view in replay_snapshots(records):
            assert json.loads(canonical_json(view))["tick"] == 0
