"""Live control endpoint: paced simulation plus a WebSocket operator channel.

The simulation owns one writer thread; clients talk to it through a command
queue and read back immutable snapshots.  A lagging client simply misses
intermediate snapshots, it is never buffered unboundedly.
"""
from __future__ import annotations

import asyncio
import json
import math
import threading
import time
from collections import deque
from contextlib import asynccontextmanager

from fastapi import FastAPI, WebSocket

from .core import World
from .scenario import ScenarioConfig

PROTOCOL_VERSION = 1
SNAPSHOT_HZ = 30.0
COMMAND_TYPES = (
    "pause", "resume", "single_step", "set_timescale",
    "shower.set_pose", "shower.emit_signal", "shower.program",
    "swap_program", "emit_signal", "inspect",
)

_PACING = frozenset(("pause", "resume", "single_step", "set_timescale"))
_CHUNK_TICKS = 512  # max ticks per loop pass, keeps command latency low
_MAX_BACKLOG_TICKS = 4 * _CHUNK_TICKS  # beyond this we drop time debt


class SimController:
    """Runs the world on its own thread, paced against the wall clock.

    Pacing state (paused flag, step budget, timescale, anchors) is written
    only by the sim thread itself while handling commands, so the thread can
    read it without holding the lock.  The condition guards the inbound
    command queue and the stop flag.
    """

    def __init__(self, config: ScenarioConfig, trace_path: str | None = None,
                 timescale: float = 1.0, start_paused: bool = False):
        self.world = World(config, trace_path=trace_path)
        self.dt = config.dt
        self.digest: str | None = None
        self._cond = threading.Condition()
        self._queue: deque = deque()
        self._stop = False
        self._paused = start_paused
        self._step_budget = 0
        self._timescale = float(timescale)
        self._anchor_wall = time.perf_counter()
        self._anchor_tick = 0
        self._thread: threading.Thread | None = None
        self._snap_lock = threading.Lock()
        self._snap: dict = {}
        self._snap_version = 0
        self._snap_wall = -math.inf
        self._refresh_snapshot(force=True)

    # ------------------------------------------------------- lifecycle

    def start(self) -> None:
        self._anchor_wall = time.perf_counter()
        self._anchor_tick = self.world.tick
        self._thread = threading.Thread(target=self._run, name="pogoswarm-sim",
                                        daemon=True)
        self._thread.start()

    def stop(self) -> str:
        """Halt the loop, flush the trace, and return its digest."""
        with self._cond:
            self._stop = True
            self._cond.notify_all()
        if self._thread is not None:
            self._thread.join()
            self._thread = None
        if self.digest is None:
            self.digest = self.world.close()
        return self.digest

    # ------------------------------------------- client-facing (any thread)

    def submit(self, command: dict, reply_cb) -> None:
        """Queue a command; reply_cb(ok, payload) fires on the sim thread."""
        with self._cond:
            if not self._stop:
                self._queue.append((command, reply_cb))
                self._cond.notify_all()
                return
        reply_cb(False, {"error": "server is shutting down"})

    def latest_snapshot(self) -> tuple[int, dict]:
        with self._snap_lock:
            return self._snap_version, self._snap

    # ----------------------------------------------------- pacing helpers

    def _ticks_due(self, now: float) -> int:
        if self._paused:
            return self._step_budget
        target = self._anchor_tick + int(
            (now - self._anchor_wall) * self._timescale / self.dt)
        return max(0, target - self.world.tick)

    def _wait_seconds(self, now: float) -> float | None:
        if self._paused:
            return None if self._step_budget == 0 else 0.0
        next_due = self._anchor_wall + (
            (self.world.tick + 1 - self._anchor_tick) * self.dt / self._timescale)
        return max(0.0, next_due - now)

    # --------------------------------------------------------- sim thread

    def _run(self) -> None:
        while True:
            with self._cond:
                if self._stop:
                    break
                batch = list(self._queue)
                self._queue.clear()
            for command, reply_cb in batch:
                ok, payload = self._handle(command)
                reply_cb(ok, payload)

            now = time.perf_counter()
            due = self._ticks_due(now)
            chunk = min(due, _CHUNK_TICKS)
            for _ in range(chunk):
                self.world.step()
            if self._paused:
                self._step_budget = max(0, self._step_budget - chunk)
            elif due - chunk > _MAX_BACKLOG_TICKS:
                # the host cannot sustain this timescale; forgive the debt
                # rather than spiral further behind
                self._anchor_wall = time.perf_counter()
                self._anchor_tick = self.world.tick
            self._refresh_snapshot(force=bool(batch) or bool(chunk and self._paused))

            with self._cond:
                if self._stop:
                    break
                if self._queue:
                    continue
                now = time.perf_counter()
                if self._ticks_due(now) > 0:
                    continue
                self._cond.wait(self._wait_seconds(now))
        # resolve stragglers so no client future hangs
        with self._cond:
            leftovers = list(self._queue)
            self._queue.clear()
        for _, reply_cb in leftovers:
            reply_cb(False, {"error": "server is shutting down"})

    def _handle(self, command) -> tuple[bool, dict]:
        if not isinstance(command, dict):
            return False, {"error": "command must be a JSON object"}
        ctype = command.get("type")
        payload = command.get("payload") or {}
        if not isinstance(ctype, str):
            return False, {"error": "command needs a string 'type'"}
        if not isinstance(payload, dict):
            return False, {"error": "payload must be an object"}

        if ctype == "inspect":
            ident = payload.get("id")
            if not isinstance(ident, int) or isinstance(ident, bool):
                return False, {"error": "inspect needs an integer robot id"}
            view = self.world.inspect_robot(ident)
            if view is None:
                return False, {"error": f"unknown robot id {ident}"}
            return True, view

        if ctype in _PACING:
            return self._handle_pacing(ctype, payload)

        ok, detail = self.world.apply_command({"type": ctype, "payload": payload})
        return ok, detail

    def _handle_pacing(self, ctype: str, payload: dict) -> tuple[bool, dict]:
        if ctype == "set_timescale":
            value = payload.get("timescale")
            if (not isinstance(value, (int, float)) or isinstance(value, bool)
                    or not math.isfinite(value) or value <= 0):
                return False, {"error": "timescale must be a positive number"}
        if ctype == "single_step" and not self._paused:
            return False, {"error": "single_step only applies while paused"}

        # record the accepted marker so the session replays tick-for-tick
        ok, detail = self.world.apply_command({"type": ctype, "payload": payload})
        if not ok:
            return False, detail

        now = time.perf_counter()
        if ctype == "pause":
            self._paused = True
            self._step_budget = 0
        elif ctype == "resume":
            self._paused = False
            self._step_budget = 0
            self._anchor_wall = now
            self._anchor_tick = self.world.tick
        elif ctype == "single_step":
            self._step_budget += 1
        else:
            self._timescale = float(payload["timescale"])
            self._anchor_wall = now
            self._anchor_tick = self.world.tick
        return True, self._pacing_state()

    def _pacing_state(self) -> dict:
        return {"paused": self._paused, "timescale": self._timescale,
                "tick": self.world.tick}

    def _refresh_snapshot(self, force: bool = False) -> None:
        now = time.perf_counter()
        if not force and now - self._snap_wall < 1.0 / SNAPSHOT_HZ:
            return
        snap = self.world.snapshot()
        snap["paused"] = self._paused
        snap["timescale"] = self._timescale
        with self._snap_lock:
            self._snap_wall = now
            self._snap = snap
            self._snap_version += 1


def _resolve_future(fut: asyncio.Future, value) -> None:
    if not fut.done():
        fut.set_result(value)


def build_app(config: ScenarioConfig, trace_path: str | None = None,
              timescale: float = 1.0, start_paused: bool = False,
              frontend_dir: str | None = None) -> FastAPI:
    """Assemble the ASGI app; the sim thread lives inside the app lifespan."""
    controller = SimController(config, trace_path=trace_path,
                               timescale=timescale, start_paused=start_paused)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        controller.start()
        try:
            yield
        finally:
            controller.stop()

    app = FastAPI(title="pogoswarm control", lifespan=lifespan)
    app.state.controller = controller

    @app.websocket("/ws")
    async def control_socket(ws: WebSocket):
        await ws.accept()
        loop = asyncio.get_running_loop()
        replies: asyncio.Queue = asyncio.Queue()
        sent_version, snap = controller.latest_snapshot()
        await ws.send_text(json.dumps({
            "type": "hello",
            "payload": {"protocol": PROTOCOL_VERSION,
                        "commands": list(COMMAND_TYPES),
                        "snapshot": snap},
        }))

        async def read_commands():
            while True:
                text = await ws.receive_text()
                seq = None
                try:
                    msg = json.loads(text)
                    if not isinstance(msg, dict):
                        raise ValueError("message must be a JSON object")
                    seq = msg.get("seq")
                    fut: asyncio.Future = loop.create_future()
                    controller.submit(
                        {"type": msg.get("type"), "payload": msg.get("payload")},
                        lambda ok, payload, fut=fut: loop.call_soon_threadsafe(
                            _resolve_future, fut, (ok, payload)))
                    ok, payload = await fut
                except (json.JSONDecodeError, ValueError) as exc:
                    ok, payload = False, {"error": f"malformed command: {exc}"}
                await replies.put(
                    {"type": "ack" if ok else "error", "seq": seq,
                     "payload": payload})

        async def push_messages():
            # replies go out promptly; otherwise forward the newest snapshot.
            # awaiting each send is the backpressure: a slow client only ever
            # sees the latest snapshot once it catches up.
            last_pushed = sent_version
            while True:
                try:
                    item = await asyncio.wait_for(replies.get(),
                                                  timeout=1.0 / SNAPSHOT_HZ)
                except asyncio.TimeoutError:
                    item = None
                if item is not None:
                    await ws.send_text(json.dumps(item))
                    continue
                version, snap = controller.latest_snapshot()
                if version != last_pushed:
                    last_pushed = version
                    await ws.send_text(json.dumps(
                        {"type": "snapshot", "payload": snap}))

        tasks = [asyncio.create_task(read_commands()),
                 asyncio.create_task(push_messages())]
        try:
            await asyncio.wait(tasks, return_when=asyncio.FIRST_COMPLETED)
        finally:
            for task in tasks:
                task.cancel()
            await asyncio.gather(*tasks, return_exceptions=True)

    if frontend_dir is not None:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=frontend_dir, html=True),
                  name="frontend")

    return app


def serve_control(config: ScenarioConfig, host: str = "127.0.0.1",
                  port: int = 8000, timescale: float = 1.0,
                  trace_path: str | None = None,
                  frontend_dir: str | None = None) -> None:
    """Run the control endpoint until interrupted (duration is ignored)."""
    import uvicorn

    app = build_app(config, trace_path=trace_path, timescale=timescale,
                    frontend_dir=frontend_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")
