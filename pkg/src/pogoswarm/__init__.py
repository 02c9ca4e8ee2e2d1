"""pogoswarm: a deterministic simulator for Pogobot-style swarms.

Small directional-IR robots in a shared arena, with the experimenter-side
peripherals (signal shower, beacon walls, pushable objects), a firmware-style
controller API, a headless batch runner, and a live WebSocket control server.
"""
from .core import World
from .runner import RunResult, commands_from_trace, replay_to_digest, run_headless
from .scenario import ScenarioConfig, ScenarioError, load_scenario, parse_scenario

__version__ = "0.1.0"

__all__ = [
    "World",
    "RunResult",
    "run_headless",
    "commands_from_trace",
    "replay_to_digest",
    "ScenarioConfig",
    "ScenarioError",
    "load_scenario",
    "parse_scenario",
    "__version__",
]
