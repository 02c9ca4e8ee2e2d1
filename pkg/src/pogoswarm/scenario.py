"""Scenario files: strict JSON in, fully resolved world description out.

Parsing is deliberately unforgiving. Unknown keys are rejected with the path
that offended, robots must physically fit where they are placed, and every
referenced program must exist, because a typo silently tolerated here turns
into an unexplainable experiment later.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from . import demos  # noqa: F401 - populates the program registry
from .firmware import PROGRAM_REGISTRY
from .geometry import Pose2D, clamp_disc_in_polygon, ensure_ccw, polygon_bounds
from .irnet import ChannelParams
from .locomotion import MotionModelParams
from .peripherals import (
    OBJECT_PUSH_THRESHOLD,
    OBJECT_V_MAX,
    SHOWER_CONE_HALF_ANGLE,
    SHOWER_RANGE,
    WALL_BEACON_PERIOD,
    WALL_EMIT_RANGE,
)
from .sensing import LightSource, SensingParams

ROBOT_RADIUS = 0.03  # m, the body is about six centimeters across
DEFAULT_DT = 0.001
DEFAULT_CONTROLLER_PERIOD = 0.033
DEFAULT_DURATION = 10.0
DEFAULT_SAMPLE_EVERY = 0.1
DEFAULT_SPACING = 0.12


class ScenarioError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(slots=True)
class RobotSpec:
    pose: Pose2D
    program: str = "idle"
    radius: float = ROBOT_RADIUS
    params: dict = field(default_factory=dict)
    motion: MotionModelParams | None = None  # per-robot override, else defaults


@dataclass(slots=True)
class WallSpec:
    p1: tuple[float, float]
    p2: tuple[float, float]
    wall_id: int
    beacon_period: float = WALL_BEACON_PERIOD
    emit_range: float = WALL_EMIT_RANGE


@dataclass(slots=True)
class ObjectSpec:
    x: float
    y: float
    radius: float
    object_id: int
    movable: bool = True
    push_threshold: int = OBJECT_PUSH_THRESHOLD
    v_max: float = OBJECT_V_MAX
    beacon_period: float = WALL_BEACON_PERIOD  # 0 silences the object


@dataclass(slots=True)
class ShowerSpec:
    x: float
    y: float
    theta: float
    cone_half_angle: float = SHOWER_CONE_HALF_ANGLE
    range_m: float = SHOWER_RANGE


@dataclass(slots=True)
class TraceOpts:
    sample_every_s: float = DEFAULT_SAMPLE_EVERY
    kinds: list[str] | None = None


@dataclass(slots=True)
class ScenarioConfig:
    arena: list[tuple[float, float]]
    robots: list[RobotSpec]
    dt: float = DEFAULT_DT
    controller_every: int = 33
    duration_s: float = DEFAULT_DURATION
    seed: int = 0
    lights: list[LightSource] = field(default_factory=list)
    walls: list[WallSpec] = field(default_factory=list)
    objects: list[ObjectSpec] = field(default_factory=list)
    shower: ShowerSpec | None = None
    channel: ChannelParams = field(default_factory=ChannelParams)
    sensing: SensingParams = field(default_factory=SensingParams)
    motion_defaults: MotionModelParams = field(default_factory=MotionModelParams)
    trace: TraceOpts = field(default_factory=TraceOpts)
    script: list[tuple[int, dict]] = field(default_factory=list)

    @property
    def duration_ticks(self) -> int:
        return int(round(self.duration_s / self.dt))

    @property
    def sample_every_ticks(self) -> int:
        return max(1, int(round(self.trace.sample_every_s / self.dt)))

    def meta_dict(self) -> dict:
        return {
            "format": 1,
            "seed": self.seed,
            "dt": self.dt,
            "controller_every": self.controller_every,
            "duration_ticks": self.duration_ticks,
            "sample_every": self.sample_every_ticks,
            "arena": [[x, y] for x, y in self.arena],
            "robots": [
                {
                    "id": i,
                    "x": r.pose.x, "y": r.pose.y, "theta": r.pose.theta,
                    "radius": r.radius,
                    "program": r.program,
                    "params": r.params,
                }
                for i, r in enumerate(self.robots)
            ],
            "channel": {
                "range": self.channel.range_m,
                "tx_half_angle": self.channel.tx_half_angle,
                "rx_half_angle": self.channel.rx_half_angle,
                "bitrate": self.channel.bitrate,
                "collision_policy": self.channel.collision_policy,
            },
            "walls": [
                {"wall_id": w.wall_id, "p1": list(w.p1), "p2": list(w.p2)}
                for w in self.walls
            ],
            "objects": [
                {"object_id": o.object_id, "x": o.x, "y": o.y, "radius": o.radius}
                for o in self.objects
            ],
            "shower": None if self.shower is None else {
                "x": self.shower.x, "y": self.shower.y, "theta": self.shower.theta,
                "cone_half_angle": self.shower.cone_half_angle,
                "range": self.shower.range_m,
            },
        }


def _require_dict(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise ScenarioError(path, f"expected an object, got {type(value).__name__}")
    return value


def _check_keys(obj: dict, allowed: set[str], path: str) -> None:
    for key in obj:
        if key not in allowed:
            raise ScenarioError(f"{path}.{key}", "unknown key")


def _number(obj: dict, key: str, path: str, default=None, minimum=None, maximum=None):
    if key not in obj:
        if default is None:
            raise ScenarioError(f"{path}.{key}", "required")
        return default
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{path}.{key}", "expected a number")
    value = float(value)
    if not math.isfinite(value):
        raise ScenarioError(f"{path}.{key}", "must be finite")
    if minimum is not None and value < minimum:
        raise ScenarioError(f"{path}.{key}", f"must be >= {minimum}")
    if maximum is not None and value > maximum:
        raise ScenarioError(f"{path}.{key}", f"must be <= {maximum}")
    return value


def _integer(obj: dict, key: str, path: str, default=None, minimum=None):
    if key not in obj:
        if default is None:
            raise ScenarioError(f"{path}.{key}", "required")
        return default
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"{path}.{key}", "expected an integer")
    if minimum is not None and value < minimum:
        raise ScenarioError(f"{path}.{key}", f"must be >= {minimum}")
    return value


def _point(value, path: str) -> tuple[float, float]:
    if (not isinstance(value, list) or len(value) != 2
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value)):
        raise ScenarioError(path, "expected [x, y]")
    x, y = float(value[0]), float(value[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ScenarioError(path, "coordinates must be finite")
    return x, y


def _parse_arena(obj, path: str) -> list[tuple[float, float]]:
    arena = _require_dict(obj, path)
    _check_keys(arena, {"rect", "polygon"}, path)
    if ("rect" in arena) == ("polygon" in arena):
        raise ScenarioError(path, "give exactly one of rect or polygon")
    if "rect" in arena:
        w, h = _point(arena["rect"], f"{path}.rect")
        if w <= 0 or h <= 0:
            raise ScenarioError(f"{path}.rect", "sides must be positive")
        return [(0.0, 0.0), (w, 0.0), (w, h), (0.0, h)]
    pts = arena["polygon"]
    if not isinstance(pts, list) or len(pts) < 3:
        raise ScenarioError(f"{path}.polygon", "need at least 3 points")
    return ensure_ccw([_point(p, f"{path}.polygon[{i}]") for i, p in enumerate(pts)])


def _parse_motion(obj, path: str, base: MotionModelParams) -> MotionModelParams:
    spec = _require_dict(obj, path)
    _check_keys(spec, {"model", "v_max", "omega_max", "wheel_base",
                       "noise_v", "noise_omega", "bias_omega_std"}, path)
    params = base.copy()
    if "model" in spec:
        if spec["model"] not in ("vibration", "differential"):
            raise ScenarioError(f"{path}.model", "must be 'vibration' or 'differential'")
        params.model = spec["model"]
    params.v_max = _number(spec, "v_max", path, params.v_max, minimum=0.0)
    params.omega_max = _number(spec, "omega_max", path, params.omega_max, minimum=0.0)
    params.wheel_base = _number(spec, "wheel_base", path, params.wheel_base, minimum=1e-6)
    params.noise_v = _number(spec, "noise_v", path, params.noise_v, minimum=0.0)
    params.noise_omega = _number(spec, "noise_omega", path, params.noise_omega, minimum=0.0)
    params.bias_omega_std = _number(spec, "bias_omega_std", path, params.bias_omega_std, minimum=0.0)
    return params


def _parse_robot_entry(entry, path: str, base_motion: MotionModelParams) -> RobotSpec:
    robot = _require_dict(entry, path)
    _check_keys(robot, {"pose", "program", "radius", "params", "motion"}, path)
    if "pose" not in robot:
        raise ScenarioError(f"{path}.pose", "required")
    pose_val = robot["pose"]
    if not isinstance(pose_val, list) or len(pose_val) != 3:
        raise ScenarioError(f"{path}.pose", "expected [x, y, theta]")
    x, y = _point(pose_val[:2], f"{path}.pose")
    theta = _number({"theta": pose_val[2]}, "theta", path)
    program = robot.get("program", "idle")
    params = robot.get("params", {})
    if not isinstance(params, dict):
        raise ScenarioError(f"{path}.params", "expected an object")
    motion = None
    if "motion" in robot:
        motion = _parse_motion(robot["motion"], f"{path}.motion", base_motion)
    return RobotSpec(
        pose=Pose2D(x, y, theta),
        program=program,
        radius=_number(robot, "radius", path, ROBOT_RADIUS, minimum=1e-4),
        params=dict(params),
        motion=motion,
    )


def _grid_layout(count: int, arena, radius: float, spacing: float, path: str):
    minx, miny, maxx, maxy = polygon_bounds(arena)
    margin = radius + spacing / 2.0
    poses = []
    y = miny + margin
    while y <= maxy - margin + 1e-9 and len(poses) < count:
        x = minx + margin
        while x <= maxx - margin + 1e-9 and len(poses) < count:
            cx, cy = clamp_disc_in_polygon(x, y, radius, arena)
            if abs(cx - x) < 1e-9 and abs(cy - y) < 1e-9:
                poses.append(Pose2D(x, y, 0.0))
            x += spacing
        y += spacing
    if len(poses) < count:
        raise ScenarioError(path, f"arena fits only {len(poses)} of {count} robots "
                                  f"at spacing {spacing}")
    return poses


def _parse_robots(obj, path: str, arena, base_motion: MotionModelParams) -> list[RobotSpec]:
    if isinstance(obj, list):
        return [
            _parse_robot_entry(entry, f"{path}[{i}]", base_motion)
            for i, entry in enumerate(obj)
        ]
    robots = _require_dict(obj, path)
    _check_keys(robots, {"count", "program", "spacing", "radius", "params", "per_robot"}, path)
    count = _integer(robots, "count", path, minimum=1)
    program = robots.get("program", "idle")
    radius = _number(robots, "radius", path, ROBOT_RADIUS, minimum=1e-4)
    spacing = _number(robots, "spacing", path, DEFAULT_SPACING, minimum=2.0 * radius)
    shared = robots.get("params", {})
    if not isinstance(shared, dict):
        raise ScenarioError(f"{path}.params", "expected an object")
    poses = _grid_layout(count, arena, radius, spacing, path)
    specs = [
        RobotSpec(pose=p, program=program, radius=radius, params=dict(shared))
        for p in poses
    ]
    overrides = robots.get("per_robot", {})
    if not isinstance(overrides, dict):
        raise ScenarioError(f"{path}.per_robot", "expected an object keyed by index")
    for key, patch in overrides.items():
        try:
            idx = int(key)
        except ValueError:
            raise ScenarioError(f"{path}.per_robot.{key}", "keys must be integer indexes")
        if not 0 <= idx < count:
            raise ScenarioError(f"{path}.per_robot.{key}", "index out of range")
        patch = _require_dict(patch, f"{path}.per_robot.{key}")
        _check_keys(patch, {"pose", "program", "params", "motion"}, f"{path}.per_robot.{key}")
        spec = specs[idx]
        if "pose" in patch:
            pv = patch["pose"]
            if not isinstance(pv, list) or len(pv) != 3:
                raise ScenarioError(f"{path}.per_robot.{key}.pose", "expected [x, y, theta]")
            spec.pose = Pose2D(float(pv[0]), float(pv[1]), float(pv[2]))
        if "program" in patch:
            spec.program = patch["program"]
        if "params" in patch:
            merged = dict(spec.params)
            merged.update(_require_dict(patch["params"], f"{path}.per_robot.{key}.params"))
            spec.params = merged
        if "motion" in patch:
            spec.motion = _parse_motion(patch["motion"], f"{path}.per_robot.{key}.motion", base_motion)
    return specs


def parse_scenario(source: str | dict, name: str = "scenario") -> ScenarioConfig:
    if isinstance(source, str):
        try:
            raw = json.loads(source)
        except json.JSONDecodeError as exc:
            raise ScenarioError(name, f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}")
    else:
        raw = source
    raw = _require_dict(raw, name)
    _check_keys(raw, {
        "arena", "robots", "lights", "walls", "objects", "shower", "channel",
        "sensing", "motion", "seed", "duration", "dt", "controller_period",
        "trace", "script",
    }, name)
    if "arena" not in raw:
        raise ScenarioError(f"{name}.arena", "required")
    if "robots" not in raw:
        raise ScenarioError(f"{name}.robots", "required")

    arena = _parse_arena(raw["arena"], f"{name}.arena")

    dt = _number(raw, "dt", name, DEFAULT_DT, minimum=1e-6)
    period = _number(raw, "controller_period", name, DEFAULT_CONTROLLER_PERIOD, minimum=dt)
    ratio = period / dt
    controller_every = int(round(ratio))
    if controller_every < 1 or abs(ratio - controller_every) > 1e-6 * max(1.0, ratio):
        raise ScenarioError(f"{name}.controller_period", "must be an integer multiple of dt")

    motion_defaults = MotionModelParams()
    if "motion" in raw:
        motion_defaults = _parse_motion(raw["motion"], f"{name}.motion", motion_defaults)

    robots = _parse_robots(raw["robots"], f"{name}.robots", arena, motion_defaults)
    for i, spec in enumerate(robots):
        if spec.program not in PROGRAM_REGISTRY:
            raise ScenarioError(f"{name}.robots[{i}].program",
                                f"unknown program {spec.program!r}; "
                                f"available: {', '.join(sorted(PROGRAM_REGISTRY))}")
        cx, cy = clamp_disc_in_polygon(spec.pose.x, spec.pose.y, spec.radius, arena)
        if abs(cx - spec.pose.x) > 1e-9 or abs(cy - spec.pose.y) > 1e-9:
            raise ScenarioError(f"{name}.robots[{i}].pose", "robot does not fit inside the arena")
    for i in range(len(robots)):
        for j in range(i + 1, len(robots)):
            a, b = robots[i], robots[j]
            d = math.hypot(a.pose.x - b.pose.x, a.pose.y - b.pose.y)
            if d < a.radius + b.radius - 1e-12:
                raise ScenarioError(f"{name}.robots[{j}].pose",
                                    f"overlaps robot {i} (distance {d:.4f})")

    lights = []
    for i, entry in enumerate(raw.get("lights", [])):
        lpath = f"{name}.lights[{i}]"
        light = _require_dict(entry, lpath)
        _check_keys(light, {"pos", "power", "kind"}, lpath)
        kind = light.get("kind", "point")
        if kind not in ("point", "ambient"):
            raise ScenarioError(f"{lpath}.kind", "must be 'point' or 'ambient'")
        power = _number(light, "power", lpath, minimum=0.0)
        if kind == "ambient":
            lights.append(LightSource(0.0, 0.0, power, kind="ambient"))
        else:
            if "pos" not in light:
                raise ScenarioError(f"{lpath}.pos", "required for point lights")
            x, y = _point(light["pos"], f"{lpath}.pos")
            lights.append(LightSource(x, y, power))

    walls = []
    for i, entry in enumerate(raw.get("walls", [])):
        wpath = f"{name}.walls[{i}]"
        wall = _require_dict(entry, wpath)
        _check_keys(wall, {"p1", "p2", "wall_id", "beacon_period", "emit_range"}, wpath)
        p1 = _point(wall.get("p1"), f"{wpath}.p1")
        p2 = _point(wall.get("p2"), f"{wpath}.p2")
        if p1 == p2:
            raise ScenarioError(wpath, "wall endpoints must differ")
        wall_id = _integer(wall, "wall_id", wpath, minimum=0)
        if wall_id > 0xFFFF:
            raise ScenarioError(f"{wpath}.wall_id", "must fit in 16 bits")
        if any(w.wall_id == wall_id for w in walls):
            raise ScenarioError(f"{wpath}.wall_id", f"duplicate wall_id {wall_id}")
        walls.append(WallSpec(
            p1=p1, p2=p2,
            wall_id=wall_id,
            beacon_period=_number(wall, "beacon_period", wpath, WALL_BEACON_PERIOD, minimum=dt),
            emit_range=_number(wall, "emit_range", wpath, WALL_EMIT_RANGE, minimum=0.0),
        ))

    objects = []
    for i, entry in enumerate(raw.get("objects", [])):
        opath = f"{name}.objects[{i}]"
        obj = _require_dict(entry, opath)
        _check_keys(obj, {"pos", "radius", "movable", "push_threshold", "v_max",
                          "object_id", "beacon_period"}, opath)
        if "pos" not in obj:
            raise ScenarioError(f"{opath}.pos", "required")
        x, y = _point(obj["pos"], f"{opath}.pos")
        movable = obj.get("movable", True)
        if not isinstance(movable, bool):
            raise ScenarioError(f"{opath}.movable", "expected true or false")
        object_id = _integer(obj, "object_id", opath, i)
        if object_id > 0xFFFF:
            raise ScenarioError(f"{opath}.object_id", "must fit in 16 bits")
        if any(o.object_id == object_id for o in objects):
            raise ScenarioError(f"{opath}.object_id", f"duplicate object_id {object_id}")
        objects.append(ObjectSpec(
            x=x, y=y,
            radius=_number(obj, "radius", opath, 0.05, minimum=1e-4),
            object_id=object_id,
            movable=movable,
            push_threshold=_integer(obj, "push_threshold", opath, OBJECT_PUSH_THRESHOLD, minimum=1),
            v_max=_number(obj, "v_max", opath, OBJECT_V_MAX, minimum=0.0),
            beacon_period=_number(obj, "beacon_period", opath, WALL_BEACON_PERIOD, minimum=0.0),
        ))

    shower = None
    if "shower" in raw:
        spath = f"{name}.shower"
        sh = _require_dict(raw["shower"], spath)
        _check_keys(sh, {"pos", "aim_deg", "cone_half_angle_deg", "range"}, spath)
        if "pos" not in sh:
            raise ScenarioError(f"{spath}.pos", "required")
        x, y = _point(sh["pos"], f"{spath}.pos")
        shower = ShowerSpec(
            x=x, y=y,
            theta=math.radians(_number(sh, "aim_deg", spath, 0.0)),
            cone_half_angle=math.radians(
                _number(sh, "cone_half_angle_deg", spath, math.degrees(SHOWER_CONE_HALF_ANGLE),
                        minimum=1.0, maximum=179.0)),
            range_m=_number(sh, "range", spath, SHOWER_RANGE, minimum=1e-3),
        )

    channel = ChannelParams()
    if "channel" in raw:
        cpath = f"{name}.channel"
        ch = _require_dict(raw["channel"], cpath)
        _check_keys(ch, {"range", "tx_half_angle_deg", "rx_half_angle_deg",
                         "bitrate", "collision_policy"}, cpath)
        channel.range_m = _number(ch, "range", cpath, channel.range_m, minimum=0.0)
        channel.tx_half_angle = math.radians(
            _number(ch, "tx_half_angle_deg", cpath, math.degrees(channel.tx_half_angle),
                    minimum=1.0, maximum=180.0))
        channel.rx_half_angle = math.radians(
            _number(ch, "rx_half_angle_deg", cpath, math.degrees(channel.rx_half_angle),
                    minimum=1.0, maximum=180.0))
        channel.bitrate = _number(ch, "bitrate", cpath, channel.bitrate, minimum=1.0)
        policy = ch.get("collision_policy", channel.collision_policy)
        if policy not in ("destructive", "capture"):
            raise ScenarioError(f"{cpath}.collision_policy",
                                "must be 'destructive' or 'capture'")
        channel.collision_policy = policy

    sensing = SensingParams()
    if "sensing" in raw:
        spath = f"{name}.sensing"
        sn = _require_dict(raw["sensing"], spath)
        _check_keys(sn, {"noise_light", "i_sat", "noise_accel", "noise_gyro",
                         "cosine_weighting"}, spath)
        sensing.noise_light = _number(sn, "noise_light", spath, sensing.noise_light, minimum=0.0)
        sensing.i_sat = _number(sn, "i_sat", spath, sensing.i_sat, minimum=1e-9)
        sensing.noise_accel = _number(sn, "noise_accel", spath, sensing.noise_accel, minimum=0.0)
        sensing.noise_gyro = _number(sn, "noise_gyro", spath, sensing.noise_gyro, minimum=0.0)
        cw = sn.get("cosine_weighting", sensing.cosine_weighting)
        if not isinstance(cw, bool):
            raise ScenarioError(f"{spath}.cosine_weighting", "expected true or false")
        sensing.cosine_weighting = cw

    trace = TraceOpts()
    if "trace" in raw:
        tpath = f"{name}.trace"
        tr = _require_dict(raw["trace"], tpath)
        _check_keys(tr, {"sample_every", "kinds"}, tpath)
        trace.sample_every_s = _number(tr, "sample_every", tpath, trace.sample_every_s, minimum=dt)
        if "kinds" in tr:
            kinds = tr["kinds"]
            from .trace import RECORD_KINDS
            if (not isinstance(kinds, list)
                    or any(k not in RECORD_KINDS for k in kinds)):
                raise ScenarioError(f"{tpath}.kinds",
                                    f"must be a list drawn from {', '.join(RECORD_KINDS)}")
            trace.kinds = list(kinds)

    script = []
    for i, entry in enumerate(raw.get("script", [])):
        spath = f"{name}.script[{i}]"
        cmd = _require_dict(entry, spath)
        _check_keys(cmd, {"at", "type", "payload"}, spath)
        at = _number(cmd, "at", spath, minimum=0.0)
        if "type" not in cmd or not isinstance(cmd["type"], str):
            raise ScenarioError(f"{spath}.type", "required string")
        payload = cmd.get("payload", {})
        if not isinstance(payload, dict):
            raise ScenarioError(f"{spath}.payload", "expected an object")
        script.append((int(round(at / dt)), {"type": cmd["type"], "payload": payload}))
    script.sort(key=lambda item: item[0])

    return ScenarioConfig(
        arena=arena,
        robots=robots,
        dt=dt,
        controller_every=controller_every,
        duration_s=_number(raw, "duration", name, DEFAULT_DURATION, minimum=0.0),
        seed=_integer(raw, "seed", name, 0),
        lights=lights,
        walls=walls,
        objects=objects,
        shower=shower,
        channel=channel,
        sensing=sensing,
        motion_defaults=motion_defaults,
        trace=trace,
        script=script,
    )


def load_scenario(path: str) -> ScenarioConfig:
    with open(path, "r") as fh:
        return parse_scenario(fh.read(), name=path)
