"""Append-only JSON Lines run traces.

Every record carries (tick, phase, kind, entity, data). Records within a
tick are written sorted by phase then entity, so two runs that performed the
same work produce byte-identical files. The digest is a streaming 64-bit
blake2b over exactly the bytes written; floats are rendered at 9 significant
digits so formatting is part of the contract.
"""
from __future__ import annotations

import hashlib
import json
import math
from typing import Any, Iterable

RECORD_KINDS = (
    "meta", "pose", "led", "frame_tx", "frame_rx", "frame_drop",
    "signal", "program_swap", "error", "metric",
)

META_PHASE = 0


def _fmt_float(v: float) -> str:
    if math.isnan(v) or math.isinf(v):
        raise ValueError("non-finite float in trace record")
    if v == 0.0:
        v = 0.0  # collapse -0.0
    return format(v, ".9g")


def _write_canonical(obj: Any, emit) -> None:
    if obj is None:
        emit("null")
    elif obj is True:
        emit("true")
    elif obj is False:
        emit("false")
    elif isinstance(obj, int):
        emit(str(obj))
    elif isinstance(obj, float):
        emit(_fmt_float(obj))
    elif isinstance(obj, str):
        emit(json.dumps(obj))
    elif isinstance(obj, (bytes, bytearray)):
        emit(json.dumps(obj.hex()))
    elif isinstance(obj, (list, tuple)):
        emit("[")
        for i, item in enumerate(obj):
            if i:
                emit(",")
            _write_canonical(item, emit)
        emit("]")
    elif isinstance(obj, dict):
        emit("{")
        for i, key in enumerate(sorted(obj)):
            if i:
                emit(",")
            if not isinstance(key, str):
                raise TypeError(f"non-string key {key!r}")
            emit(json.dumps(key))
            emit(":")
            _write_canonical(obj[key], emit)
        emit("}")
    else:
        raise TypeError(f"unserializable value {obj!r}")


def canonical_json(obj: Any) -> str:
    parts: list[str] = []
    _write_canonical(obj, parts.append)
    return "".join(parts)


class TraceWriter:
    """Buffers one tick's records, orders them, then streams them out."""

    def __init__(
        self,
        path: str | None = None,
        keep_records: bool = False,
        kinds: Iterable[str] | None = None,
    ):
        self._fh = open(path, "w", buffering=1 << 16) if path else None
        self._hash = hashlib.blake2b(digest_size=8)
        self.records: list[dict] | None = [] if keep_records else None
        self._buf: list[tuple[int, int, int, str, int | None, Any]] = []
        self._kinds = set(kinds) if kinds is not None else None
        self.line_count = 0

    def add(self, tick: int, phase: int, kind: str, entity: int | None, data: Any) -> None:
        if self._kinds is not None and kind != "meta" and kind not in self._kinds:
            return
        sort_entity = -1 if entity is None else entity
        self._buf.append((tick, phase, sort_entity, kind, entity, data))

    def end_tick(self) -> None:
        if not self._buf:
            return
        self._buf.sort(key=lambda r: (r[1], r[2]))
        for tick, phase, _, kind, entity, data in self._buf:
            record = {"tick": tick, "phase": phase, "kind": kind,
                      "entity": entity, "data": data}
            line = canonical_json(record)
            payload = line.encode() + b"\n"
            self._hash.update(payload)
            if self._fh is not None:
                self._fh.write(line + "\n")
            if self.records is not None:
                self.records.append(record)
            self.line_count += 1
        self._buf.clear()

    def digest(self) -> str:
        return self._hash.hexdigest()

    def close(self) -> str:
        self.end_tick()
        if self._fh is not None:
            self._fh.close()
            self._fh = None
        return self.digest()


def load_trace(path: str) -> tuple[list[dict], bool]:
    """Parse a trace file; a corrupt or truncated tail stops the read.

    Returns (records up to the last fully valid tick, truncated flag).
    """
    records: list[dict] = []
    truncated = False
    tail_tick = None  # tick of the offending line, when recoverable
    with open(path, "r") as fh:
        for line in fh:
            stripped = line.rstrip("\n")
            if not stripped:
                continue
            try:
                rec = json.loads(stripped)
            except json.JSONDecodeError:
                rec = None
            ok = isinstance(rec, dict) and "tick" in rec and "kind" in rec
            if not line.endswith("\n") or not ok:
                truncated = True
                if ok:
                    tail_tick = rec["tick"]
                break
            records.append(rec)
    if truncated and records:
        # a tick's records are written together, so the last tick seen is
        # complete only if the interrupted line belongs to a later one
        last_tick = records[-1]["tick"]
        if tail_tick is None or tail_tick <= last_tick:
            records = [r for r in records if r["tick"] != last_tick]
    return records, truncated


def trace_digest(records: Iterable[dict]) -> str:
    """Digest of already-parsed records, matching TraceWriter byte for byte."""
    h = hashlib.blake2b(digest_size=8)
    for rec in records:
        h.update(canonical_json(rec).encode() + b"\n")
    return h.hexdigest()


def replay_snapshots(records: list[dict]):
    """Rebuild per-tick world views from a trace without re-simulating.

    Yields dicts {tick, poses, leds, programs} at every tick that carried
    pose records.
    """
    poses: dict[int, dict] = {}
    leds: dict[int, dict] = {}
    programs: dict[int, str] = {}
    by_tick: dict[int, list[dict]] = {}
    for rec in records:
        by_tick.setdefault(rec["tick"], []).append(rec)
    for tick in sorted(by_tick):
        emit = False
        for rec in by_tick[tick]:
            kind = rec["kind"]
            entity = rec["entity"]
            if kind == "pose":
                poses[entity] = dict(rec["data"])
                emit = True
            elif kind == "led":
                led = rec["data"]
                leds.setdefault(entity, {})[str(led["which"])] = list(led["rgb"])
            elif kind == "program_swap":
                programs[entity] = rec["data"]["program"]
        if emit:
            # entity ids become string keys so the views serialize as JSON
            yield {
                "tick": tick,
                "poses": {str(k): dict(v) for k, v in sorted(poses.items())},
                "leds": {str(k): {w: list(c) for w, c in v.items()}
                         for k, v in sorted(leds.items())},
                "programs": {str(k): v for k, v in sorted(programs.items())},
            }
