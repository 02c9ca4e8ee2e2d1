"""Headless batch execution: run a scenario to completion, as fast as possible."""
from __future__ import annotations

import time
from dataclasses import dataclass

from .core import World
from .metrics import compute_metrics, write_metrics_csv
from .scenario import ScenarioConfig


@dataclass(slots=True)
class RunResult:
    digest: str
    ticks: int
    wall_seconds: float
    trace_lines: int
    world: World


def run_headless(config: ScenarioConfig, trace_path: str | None = None,
                 metrics_path: str | None = None,
                 keep_records: bool = False) -> RunResult:
    keep = keep_records or metrics_path is not None
    world = World(config, trace_path=trace_path, keep_records=keep)
    started = time.perf_counter()
    world.run(config.duration_ticks, config.script)
    digest = world.close()
    wall = time.perf_counter() - started
    if metrics_path is not None:
        write_metrics_csv(compute_metrics(world.writer.records), metrics_path)
    return RunResult(digest=digest, ticks=world.tick, wall_seconds=wall,
                     trace_lines=world.writer.line_count, world=world)


def commands_from_trace(records: list[dict]) -> list[tuple[int, dict]]:
    """Recover the operator command script a recorded session applied."""
    script = []
    for rec in records:
        if rec["kind"] == "meta" and rec["data"].get("event") == "command":
            script.append((rec["tick"], rec["data"]["command"]))
    return script


def replay_to_digest(config: ScenarioConfig, ticks: int,
                     script: list[tuple[int, dict]]) -> str:
    """Re-run a session offline from its scenario and recorded commands."""
    world = World(config)
    during = [(t, c) for t, c in script if t < ticks]
    world.run(ticks, during)
    # commands recorded at the final tick arrived while the session sat
    # paused after its last step; apply them the same way, between ticks
    for _, command in sorted(
            ((t, c) for t, c in script if t >= ticks),
            key=lambda item: item[0]):
        world.apply_command(command)
    return world.close()
