"""The world: robots, peripherals, and the fixed-timestep update loop.

Each tick runs seven phases in a frozen order: external commands, controller
execution, motion integration, pushing and collision resolution, IR traffic,
sensor sampling, trace output. Everything inside a phase iterates in entity
order, so a run is a pure function of (scenario, seed, command stream).

Ticks where provably nothing can happen are skipped in O(1); idle swarms cost
almost nothing regardless of how many robots are parked.
"""
from __future__ import annotations

import math
from collections import deque

from .firmware import (
    ControllerSlot,
    IrMessage,
    RobotApi,
    UserSignal,
    create_program,
    run_controller_tick,
)
from .geometry import (
    Pose2D,
    angle_in_cone,
    clamp_disc_in_polygon,
    closest_point_on_segment,
    normalize_angle,
    segment_hits_disc,
    segments_intersect,
)
from .irnet import (
    ALL_FACES,
    RECV_QUEUE_CAP,
    FaceId,
    FaceTimeline,
    IrFrame,
    MsgType,
    Reception,
    airtime,
    face_azimuth,
    mask_faces,
    reachable_faces,
)
from .locomotion import (
    MotorCommand,
    diff_drive_rates,
    draw_vibration_noise,
    unicycle_step,
    vibration_rates,
)
from .peripherals import (
    BEACON_KIND_OBJECT,
    BEACON_KIND_WALL,
    PogobjectState,
    ShowerState,
    WallState,
    beacon_payload,
    object_emission_point,
    object_push_velocity,
    shower_cone_targets,
    wall_emission_point,
)
from .rng import RngStream, StreamId
from .scenario import ScenarioConfig
from .sensing import ImuSample, read_imu, read_photosensors
from .trace import TraceWriter

_BLACK = (0, 0, 0)
_MAX_POSE_LOG = 4  # three recent changes plus one older anchor
_BRUTE_PAIR_LIMIT = 24  # above this, pair finding goes through a spatial hash


def _jsonable(value):
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    if isinstance(value, (bytes, bytearray)):
        return value.hex()
    if isinstance(value, (list, tuple, set, frozenset)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    return repr(value)


class RobotState:
    __slots__ = (
        "entity", "pose", "radius", "motion", "duties", "slot", "api",
        "recv_queues", "signal_queue", "head_led", "belly_leds",
        "scenario_params", "rng_motion", "rng_sensor", "rng_controller",
        "seq", "face_busy", "sent_this_tick", "pending_sends",
        "noise_v", "noise_omega", "move_log", "photo_cache", "imu_cache",
        "cmd_vx", "cmd_vy",
    )

    def __init__(self, entity: int, pose: Pose2D, radius: float, motion, params: dict):
        self.entity = entity
        self.pose = pose
        self.radius = radius
        self.motion = motion
        self.duties = MotorCommand(0.0, 0.0)
        self.slot = ControllerSlot(program_id="idle")
        self.api = None
        self.recv_queues = [deque(), deque(), deque(), deque()]
        self.signal_queue = deque()
        self.head_led = _BLACK
        self.belly_leds = [_BLACK, _BLACK, _BLACK, _BLACK]
        self.scenario_params = params
        self.rng_motion = None
        self.rng_sensor = None
        self.rng_controller = None
        self.seq = 0
        self.face_busy = [0.0, 0.0, 0.0, 0.0]
        self.sent_this_tick = 0
        self.pending_sends = []
        self.noise_v = 0.0
        self.noise_omega = 0.0
        self.move_log = [(-1, pose)]
        self.photo_cache = (-1, (0, 0, 0))
        self.imu_cache = (-1, None)
        self.cmd_vx = 0.0
        self.cmd_vy = 0.0


class World:
    def __init__(self, config: ScenarioConfig, trace_path: str | None = None,
                 keep_records: bool = False):
        self.config = config
        self.dt = config.dt
        self.controller_every = config.controller_every
        self.sample_every = config.sample_every_ticks
        self.tick = 0
        self._phase = 0
        self.arena = config.arena
        self.lights = config.lights
        self.channel = config.channel
        self.sensing = config.sensing
        self.writer = TraceWriter(trace_path, keep_records=keep_records,
                                  kinds=config.trace.kinds)
        self.writer.add(0, 0, "meta", None,
                        {"event": "start", "config": config.meta_dict()})

        seed = config.seed
        self.robots: list[RobotState] = []
        for i, spec in enumerate(config.robots):
            motion = (spec.motion or config.motion_defaults).copy()
            init_rng = RngStream(seed, i, StreamId.INIT)
            motion.bias_omega = init_rng.normal(motion.bias_omega_std)
            robot = RobotState(i, spec.pose, spec.radius, motion, dict(spec.params))
            robot.rng_motion = RngStream(seed, i, StreamId.MOTION_NOISE)
            robot.rng_sensor = RngStream(seed, i, StreamId.SENSOR_NOISE)
            robot.rng_controller = RngStream(seed, i, StreamId.CONTROLLER)
            robot.api = RobotApi(self, robot)
            self.robots.append(robot)
        next_entity = len(self.robots)

        self.walls: list[WallState] = []
        for spec in config.walls:
            every = max(1, int(round(spec.beacon_period / self.dt)))
            offset_rng = RngStream(seed, next_entity, StreamId.CHANNEL)
            self.walls.append(WallState(
                entity=next_entity, wall_id=spec.wall_id,
                x1=spec.p1[0], y1=spec.p1[1], x2=spec.p2[0], y2=spec.p2[1],
                beacon_every=every,
                beacon_offset=int(offset_rng.uniform() * every),
                emit_range=spec.emit_range,
            ))
            next_entity += 1

        self.objects: list[PogobjectState] = []
        for spec in config.objects:
            every = int(round(spec.beacon_period / self.dt)) if spec.beacon_period > 0 else 0
            offset = 0
            if every > 0:
                offset_rng = RngStream(seed, next_entity, StreamId.CHANNEL)
                offset = int(offset_rng.uniform() * every)
            self.objects.append(PogobjectState(
                entity=next_entity, object_id=spec.object_id,
                x=spec.x, y=spec.y, radius=spec.radius, movable=spec.movable,
                push_threshold=spec.push_threshold, v_max=spec.v_max,
                beacon_every=every, beacon_offset=offset,
            ))
            next_entity += 1

        self.shower: ShowerState | None = None
        if config.shower is not None:
            sh = config.shower
            self.shower = ShowerState(
                entity=next_entity,
                pose=Pose2D(sh.x, sh.y, sh.theta),
                cone_half_angle=sh.cone_half_angle,
                range_m=sh.range_m,
            )
            next_entity += 1

        self._robot_by_entity = {r.entity: r for r in self.robots}
        self._arena_edges = [
            (self.arena[i], self.arena[(i + 1) % len(self.arena)])
            for i in range(len(self.arena))
        ]
        self._wall_segments = [w.segment() for w in self.walls]

        self._active: set[int] = set()
        self._timelines: dict[tuple[int, int], FaceTimeline] = {}
        self._hot: set[tuple[int, int]] = set()
        self._pending = 0
        self._pending_swaps: list[tuple[tuple[int, ...], str, str]] = []
        self._shower_emits: list[tuple[int, bytes]] = []
        self._geom_epoch = 0
        self._reach_cache: dict = {}
        self.delivered_total = 0
        self.dropped_total = 0
        self.tx_total = 0
        self._delivered_window = 0
        self._dropped_window = 0

        self._phase = 2
        for robot in self.robots:
            self._assign_program(robot, config.robots[robot.entity].program,
                                 origin="init", record=False)
        self._phase = 0

    # ------------------------------------------------------------------ setup

    def _assign_program(self, robot: RobotState, program_id: str,
                        origin: str, record: bool = True) -> None:
        slot = robot.slot
        program = create_program(program_id)
        if program is None:
            self.log_error(robot.entity, f"unknown program {program_id!r}; idling")
            program = create_program("idle")
        slot.program_id = program_id
        slot.program = program
        slot.user_state = {}
        slot.ticks_since_swap = 0
        slot.halted = False
        if record:
            self.writer.add(self.tick, self._phase, "program_swap", robot.entity,
                            {"program": program_id, "origin": origin})
        try:
            state = program.setup(robot.api, robot.scenario_params)
            slot.user_state = state if isinstance(state, dict) else {}
        except Exception as exc:  # noqa: BLE001 - setup faults only halt this robot
            slot.halted = True
            robot.pending_sends.clear()
            self.set_robot_motors(robot, 0.0, 0.0, 0.0)
            self.log_error(robot.entity, f"setup fault: {exc!r}")

    # --------------------------------------------------------- actuation API

    def set_robot_motors(self, robot: RobotState, left: float, right: float,
                         aux: float = 0.0) -> None:
        if robot.motion.model == "differential":
            lo = -1.0
        else:
            lo = 0.0
        left = min(1.0, max(lo, float(left)))
        right = min(1.0, max(lo, float(right)))
        cmd = MotorCommand(left, right, float(aux))
        if cmd == robot.duties:
            return
        robot.duties = cmd
        if left != 0.0 or right != 0.0:
            self._active.add(robot.entity)
        else:
            self._active.discard(robot.entity)

    def set_robot_led(self, robot: RobotState, which, rgb: tuple[int, int, int]) -> None:
        rgb = tuple(min(255, max(0, int(c))) for c in rgb)
        if which == "head":
            if robot.head_led == rgb:
                return
            robot.head_led = rgb
        else:
            face = int(which)
            if not 0 <= face < 4:
                raise ValueError(f"no belly LED {which!r}")
            if robot.belly_leds[face] == rgb:
                return
            robot.belly_leds[face] = rgb
        self.writer.add(self.tick, self._phase, "led", robot.entity,
                        {"which": which, "rgb": list(rgb)})

    # ----------------------------------------------------------- sensing API

    def _pose_at(self, robot: RobotState, tick: int) -> Pose2D:
        for log_tick, pose in reversed(robot.move_log):
            if log_tick <= tick:
                return pose
        return robot.move_log[0][1]

    def robot_photosensors(self, robot: RobotState) -> tuple[int, int, int]:
        cached_tick, readings = robot.photo_cache
        if cached_tick == self.tick:
            return readings
        readings = read_photosensors(robot.pose, self.lights, self.sensing,
                                     robot.rng_sensor)
        robot.photo_cache = (self.tick, readings)
        return readings

    def robot_imu(self, robot: RobotState) -> ImuSample:
        cached_tick, sample = robot.imu_cache
        if cached_tick == self.tick:
            return sample
        t = self.tick
        if t < 2:
            sample = ImuSample(0.0, 0.0, 0.0, max(t - 1, 0))
        else:
            sample = read_imu(
                self._pose_at(robot, t - 1),
                self._pose_at(robot, t - 2),
                self._pose_at(robot, t - 3),
                self.dt, self.sensing, robot.rng_sensor, t - 1,
            )
        robot.imu_cache = (self.tick, sample)
        return sample

    def log_error(self, entity: int | None, message: str) -> None:
        self.writer.add(self.tick, self._phase, "error", entity,
                        {"message": message})

    # ------------------------------------------------------------- commands

    def schedule_swap(self, entities, program_id: str, origin: str) -> str | None:
        if create_program(program_id) is None:
            return f"unknown program {program_id!r}"
        ids = tuple(sorted(set(int(e) for e in entities)))
        for e in ids:
            if e not in self._robot_by_entity:
                return f"unknown robot {e}"
        if ids:
            self._pending_swaps.append((ids, program_id, origin))
        return None

    def _shower_targets_now(self) -> list[int]:
        discs = [(r.pose.x, r.pose.y, r.radius, r.entity) for r in self.robots]
        discs += [(o.x, o.y, o.radius, o.entity) for o in self.objects]
        segs = tuple(self._wall_segments) + tuple(self._arena_edges)
        return shower_cone_targets(self.shower, self.robots, discs, segs)

    def apply_command(self, command: dict) -> tuple[bool, dict]:
        """Validate and stage one external command; returns (accepted, detail).

        Accepted commands are recorded in the trace at the tick they applied,
        which is what makes a live piloted run replayable afterwards.
        """
        # commands always land at phase 1 of the current tick, whether they
        # arrive inside step() or between ticks from a paused control loop
        self._phase = 1
        ctype = command.get("type")
        payload = command.get("payload") or {}
        info: dict = {}
        try:
            err = self._dispatch_command(ctype, payload, info)
        except (TypeError, ValueError) as exc:
            err = str(exc)

        if err is not None:
            # rejected commands never touch the trace, so a recorded session
            # replays to the same digest from its accepted commands alone
            return False, {"error": err}
        self.writer.add(self.tick, 1, "meta", None,
                        {"event": "command",
                         "command": {"type": ctype, "payload": _jsonable(payload)}})
        return True, info

    def _dispatch_command(self, ctype, payload: dict, info: dict) -> str | None:
        if ctype in ("pause", "resume", "single_step", "set_timescale"):
            return None  # loop pacing markers; the world itself does not change
        if ctype == "swap_program":
            return self.schedule_swap(payload.get("ids", []),
                                      payload.get("program", ""), "script")
        if ctype == "shower.set_pose":
            if self.shower is None:
                return "no shower in this scenario"
            pose = self.shower.pose
            x = float(payload.get("x", pose.x))
            y = float(payload.get("y", pose.y))
            theta = (math.radians(float(payload["aim_deg"]))
                     if "aim_deg" in payload else
                     float(payload.get("theta", pose.theta)))
            if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(theta)):
                return "pose must be finite"
            self.shower.pose = Pose2D(x, y, theta)
            return None
        if ctype == "shower.emit_signal":
            if self.shower is None:
                return "no shower in this scenario"
            code = payload.get("code")
            extra = bytes.fromhex(payload.get("payload", ""))
            if not isinstance(code, int) or not 0 <= code <= 255:
                return "signal code must be an integer 0..255"
            if len(extra) > 15:
                return "signal payload exceeds 15 bytes"
            self._shower_emits.append((code, extra))
            return None
        if ctype == "shower.program":
            if self.shower is None:
                return "no shower in this scenario"
            targets = self._shower_targets_now()
            err = self.schedule_swap(targets, payload.get("program", ""), "shower")
            if err is None:
                info["targets"] = targets
            return err
        if ctype == "emit_signal":
            code = payload.get("code")
            extra = bytes.fromhex(payload.get("payload", ""))
            if not isinstance(code, int) or not 0 <= code <= 255:
                return "signal code must be an integer 0..255"
            for robot in self.robots:
                self._queue_signal(robot, UserSignal(code, extra, origin="script"),
                                   sender=None, seq=None, face=None)
            return None
        return f"unknown command type {ctype!r}"

    def _queue_signal(self, robot: RobotState, signal: UserSignal,
                      sender, seq, face) -> None:
        if len(robot.signal_queue) >= RECV_QUEUE_CAP:
            old = robot.signal_queue.popleft()
            self.writer.add(self.tick, self._phase, "frame_drop", robot.entity,
                            {"reason": "overflow", "queue": "signal",
                             "code": old.code})
            self.dropped_total += 1
            self._dropped_window += 1
        robot.signal_queue.append(signal)
        data = {"code": signal.code, "origin": signal.origin}
        if sender is not None:
            data["sender"] = sender
            data["seq"] = seq
            data["face"] = int(face)
        self.writer.add(self.tick, self._phase, "signal", robot.entity, data)

    # ------------------------------------------------------------- IR paths

    def _occluder_discs(self, skip_a: int, skip_b: int) -> list[tuple[float, float, float]]:
        discs = [
            (r.pose.x, r.pose.y, r.radius)
            for r in self.robots if r.entity != skip_a and r.entity != skip_b
        ]
        discs += [
            (o.x, o.y, o.radius)
            for o in self.objects if o.entity != skip_a and o.entity != skip_b
        ]
        return discs

    def _robot_targets(self, sender: RobotState, mask: int):
        key = (sender.entity, mask)
        cached = self._reach_cache.get(key)
        if cached is not None and cached[0] == self._geom_epoch:
            return cached[1]
        segs = tuple(self._wall_segments) + tuple(self._arena_edges)
        faces_of_mask = mask_faces(mask)
        targets = []
        max_range = self.channel.range_m
        for rx in self.robots:
            if rx is sender:
                continue
            dist = math.hypot(rx.pose.x - sender.pose.x, rx.pose.y - sender.pose.y)
            if dist > max_range:
                continue
            discs = self._occluder_discs(sender.entity, rx.entity)
            faces: set[FaceId] = set()
            for tx_face in faces_of_mask:
                faces.update(reachable_faces(sender.pose, tx_face, rx.pose,
                                             self.channel, discs, segs))
            if faces:
                targets.append((rx.entity, tuple(sorted(faces)), dist, rx.pose))
        result = tuple(targets)
        self._reach_cache[key] = (self._geom_epoch, result)
        return result

    def _schedule_reception(self, rx_entity: int, face: int, rec: Reception) -> None:
        key = (rx_entity, int(face))
        timeline = self._timelines.get(key)
        if timeline is None:
            timeline = FaceTimeline()
            self._timelines[key] = timeline
        timeline.add(rec)
        self._hot.add(key)
        self._pending += 1

    def _emit_robot_frame(self, robot: RobotState, payload: bytes, mask: int,
                          msg_type: int) -> None:
        now = self.tick * self.dt
        start = now
        faces = mask_faces(mask)
        for f in faces:
            start = max(start, robot.face_busy[f])
        end = start + airtime(len(payload), self.channel)
        for f in faces:
            robot.face_busy[f] = end
        seq = robot.seq
        robot.seq = (seq + 1) & 0xFFFF
        frame = IrFrame(robot.entity, seq, msg_type, mask, payload)
        self.tx_total += 1
        self.writer.add(self.tick, self._phase, "frame_tx", robot.entity,
                        {"seq": seq, "msg_type": int(msg_type), "mask": mask,
                         "payload": payload.hex(),
                         "t_start": start, "t_end": end})
        for rx_entity, rx_faces, dist, rx_pose in self._robot_targets(robot, mask):
            for face in rx_faces:
                self._schedule_reception(rx_entity, face, Reception(
                    frame, start, end, dist, robot.pose.x, robot.pose.y, rx_pose))

    def _beacon_spread(self, frame: IrFrame, start: float, end: float,
                      spots) -> None:
        """Deliver one beacon frame from per-receiver emission points.

        spots yields (rx, qx, qy, dist, extra_segments_excluded) rows whose
        geometry gating (range, side) the caller already performed.
        """
        for rx, qx, qy, dist, segs in spots:
            blocked = False
            for ox, oy, orad in self._occluder_discs(frame.sender, rx.entity):
                if segment_hits_disc(qx, qy, rx.pose.x, rx.pose.y, ox, oy, orad):
                    blocked = True
                    break
            if not blocked:
                for (ax, ay), (bx, by) in segs:
                    if segments_intersect(qx, qy, rx.pose.x, rx.pose.y, ax, ay, bx, by):
                        blocked = True
                        break
            if blocked:
                continue
            in_bearing = normalize_angle(math.atan2(qy - rx.pose.y, qx - rx.pose.x)
                                         - rx.pose.theta)
            for face in ALL_FACES:
                if angle_in_cone(in_bearing, face_azimuth(face),
                                 self.channel.rx_half_angle):
                    self._schedule_reception(rx.entity, face, Reception(
                        frame, start, end, dist, qx, qy, rx.pose))

    def _emit_wall_beacon(self, wall: WallState) -> None:
        payload = beacon_payload(BEACON_KIND_WALL, wall.wall_id)
        frame = IrFrame(wall.entity, wall.seq, MsgType.WALL_BEACON, 0, payload)
        wall.seq = (wall.seq + 1) & 0xFFFF
        start = self.tick * self.dt
        end = start + airtime(len(payload), self.channel)
        self.tx_total += 1
        self.writer.add(self.tick, self._phase, "frame_tx", wall.entity,
                        {"seq": frame.seq, "msg_type": int(MsgType.WALL_BEACON),
                         "mask": 0, "payload": payload.hex(),
                         "t_start": start, "t_end": end})
        segs = tuple(w.segment() for w in self.walls if w is not wall) \
            + tuple(self._arena_edges)
        spots = []
        for rx in self.robots:
            spot = wall_emission_point(wall, rx.pose.x, rx.pose.y)
            if spot is not None:
                spots.append((rx, spot[0], spot[1], spot[2], segs))
        self._beacon_spread(frame, start, end, spots)

    def _emit_object_beacon(self, obj: PogobjectState) -> None:
        payload = beacon_payload(BEACON_KIND_OBJECT, obj.object_id)
        frame = IrFrame(obj.entity, obj.seq, MsgType.WALL_BEACON, 0, payload)
        obj.seq = (obj.seq + 1) & 0xFFFF
        start = self.tick * self.dt
        end = start + airtime(len(payload), self.channel)
        self.tx_total += 1
        self.writer.add(self.tick, self._phase, "frame_tx", obj.entity,
                        {"seq": frame.seq, "msg_type": int(MsgType.WALL_BEACON),
                         "mask": 0, "payload": payload.hex(),
                         "t_start": start, "t_end": end})
        segs = tuple(self._wall_segments) + tuple(self._arena_edges)
        spots = []
        for rx in self.robots:
            spot = object_emission_point(obj, rx.pose.x, rx.pose.y,
                                         self.channel.range_m)
            if spot is not None:
                spots.append((rx, spot[0], spot[1], spot[2], segs))
        self._beacon_spread(frame, start, end, spots)

    def _emit_shower_signal(self, code: int, extra: bytes) -> None:
        sh = self.shower
        payload = bytes((code,)) + extra
        frame = IrFrame(sh.entity, sh.seq, MsgType.SHOWER_SIGNAL, 0, payload)
        sh.seq = (sh.seq + 1) & 0xFFFF
        start = self.tick * self.dt
        end = start + airtime(len(payload), self.channel)
        self.tx_total += 1
        self.writer.add(self.tick, self._phase, "frame_tx", sh.entity,
                        {"seq": frame.seq, "msg_type": int(MsgType.SHOWER_SIGNAL),
                         "mask": 0, "payload": payload.hex(),
                         "t_start": start, "t_end": end})
        for entity in self._shower_targets_now():
            rx = self._robot_by_entity[entity]
            dist = math.hypot(rx.pose.x - sh.pose.x, rx.pose.y - sh.pose.y)
            # the shower floods from above: route through the best-facing
            # receiver rather than gating on receive cones
            in_bearing = normalize_angle(
                math.atan2(sh.pose.y - rx.pose.y, sh.pose.x - rx.pose.x)
                - rx.pose.theta)
            face = min(ALL_FACES,
                       key=lambda f: abs(normalize_angle(in_bearing - face_azimuth(f))))
            self._schedule_reception(entity, face, Reception(
                frame, start, end, dist, sh.pose.x, sh.pose.y, rx.pose))

    def _deliver_due(self) -> None:
        if not self._hot:
            return
        now_end = (self.tick + 1) * self.dt
        policy = self.channel.collision_policy
        signal_seen: set[tuple[int, int, int]] = set()
        for key in sorted(self._hot):
            timeline = self._timelines[key]
            delivered, collided = timeline.finish_until(now_end, policy)
            if not delivered and not collided:
                continue
            self._pending -= len(delivered) + len(collided)
            rx_entity, face = key
            robot = self._robot_by_entity[rx_entity]
            for rec in delivered:
                frame = rec.frame
                if frame.msg_type == MsgType.SHOWER_SIGNAL:
                    skey = (rx_entity, frame.sender, frame.seq)
                    if skey in signal_seen:
                        continue
                    signal_seen.add(skey)
                    code = frame.payload[0] if frame.payload else 0
                    self._queue_signal(
                        robot, UserSignal(code, frame.payload[1:], origin="shower"),
                        sender=frame.sender, seq=frame.seq, face=face)
                    self.delivered_total += 1
                    self._delivered_window += 1
                    continue
                queue = robot.recv_queues[face]
                if len(queue) >= RECV_QUEUE_CAP:
                    old = queue.popleft()
                    self.writer.add(self.tick, self._phase, "frame_drop", rx_entity,
                                    {"sender": old.sender, "seq": old.seq,
                                     "face": face, "reason": "overflow"})
                    self.dropped_total += 1
                    self._dropped_window += 1
                queue.append(IrMessage(frame.sender, frame.seq,
                                       frame.msg_type, face, frame.payload))
                self.writer.add(self.tick, self._phase, "frame_rx", rx_entity,
                                {"sender": frame.sender, "seq": frame.seq,
                                 "face": face, "msg_type": int(frame.msg_type),
                                 "len": len(frame.payload), "dist": rec.distance})
                self.delivered_total += 1
                self._delivered_window += 1
            for rec in collided:
                self.writer.add(self.tick, self._phase, "frame_drop", rx_entity,
                                {"sender": rec.frame.sender, "seq": rec.frame.seq,
                                 "face": face, "reason": "collision"})
                self.dropped_total += 1
                self._dropped_window += 1
            if not any(r.delivered is None for r in timeline.receptions):
                self._hot.discard(key)

    # ------------------------------------------------------------- stepping

    def _apply_swaps(self) -> None:
        swaps = self._pending_swaps
        self._pending_swaps = []
        for ids, program_id, origin in swaps:
            for entity in ids:
                self._assign_program(self._robot_by_entity[entity],
                                     program_id, origin)

    def _integrate_motion(self, controller_due: bool) -> list[RobotState]:
        moved = []
        dt = self.dt
        for entity in sorted(self._active):
            robot = self._robot_by_entity[entity]
            params = robot.motion
            if params.model == "differential":
                v, omega = diff_drive_rates(robot.duties, params)
            else:
                if controller_due:
                    robot.noise_v, robot.noise_omega = draw_vibration_noise(
                        params, robot.rng_motion)
                v, omega = vibration_rates(robot.duties, params,
                                           (robot.noise_v, robot.noise_omega))
            pose = robot.pose
            robot.cmd_vx = v * math.cos(pose.theta)
            robot.cmd_vy = v * math.sin(pose.theta)
            new_pose = unicycle_step(pose, v, omega, dt)
            if new_pose is not pose:
                robot.pose = new_pose
                moved.append(robot)
        return moved

    def _push_objects(self) -> bool:
        any_moved = False
        for obj in self.objects:
            if not obj.movable:
                continue
            contacts = []
            reach = obj.radius
            for entity in sorted(self._active):
                robot = self._robot_by_entity[entity]
                dx = obj.x - robot.pose.x
                dy = obj.y - robot.pose.y
                dist = math.hypot(dx, dy)
                if dist > reach + robot.radius + 1e-9 or dist == 0.0:
                    continue
                ux, uy = dx / dist, dy / dist
                approach = robot.cmd_vx * ux + robot.cmd_vy * uy
                if approach > 1e-12:
                    contacts.append((ux, uy, approach))
            velocity = object_push_velocity(obj, contacts)
            if velocity is not None:
                px = obj.x + velocity[0] * self.dt
                py = obj.y + velocity[1] * self.dt
                for (ax, ay), (bx, by) in self._wall_segments:
                    qx, qy, _ = closest_point_on_segment(px, py, ax, ay, bx, by)
                    dx, dy = px - qx, py - qy
                    d = math.hypot(dx, dy)
                    if 1e-12 < d < obj.radius:
                        px += dx / d * (obj.radius - d)
                        py += dy / d * (obj.radius - d)
                obj.x, obj.y = clamp_disc_in_polygon(px, py, obj.radius, self.arena)
                any_moved = True
        return any_moved

    def _candidate_pairs(self):
        robots = self.robots
        n = len(robots)
        if n <= _BRUTE_PAIR_LIMIT:
            for i in range(n):
                for j in range(i + 1, n):
                    yield robots[i], robots[j]
            return
        cell = 2.0 * max(r.radius for r in robots) + 1e-6
        grid: dict[tuple[int, int], list[int]] = {}
        for idx, robot in enumerate(robots):
            key = (int(math.floor(robot.pose.x / cell)),
                   int(math.floor(robot.pose.y / cell)))
            grid.setdefault(key, []).append(idx)
        for key in sorted(grid):
            cx, cy = key
            bucket = grid[key]
            for a in range(len(bucket)):
                for b in range(a + 1, len(bucket)):
                    yield robots[bucket[a]], robots[bucket[b]]
            for off in ((1, 0), (0, 1), (1, 1), (-1, 1)):
                other = grid.get((cx + off[0], cy + off[1]))
                if not other:
                    continue
                for i in bucket:
                    for j in other:
                        yield robots[i], robots[j]

    def _resolve_collisions(self) -> set[int]:
        displaced: set[int] = set()
        for _ in range(8):
            worst = 0.0
            for a, b in self._candidate_pairs():
                dx = b.pose.x - a.pose.x
                dy = b.pose.y - a.pose.y
                min_d = a.radius + b.radius
                d2 = dx * dx + dy * dy
                if d2 >= min_d * min_d:
                    continue
                d = math.sqrt(d2)
                if d < 1e-12:
                    dx, dy, d = 1.0, 0.0, 1.0  # coincident centers: split on x
                pen = min_d - d
                worst = max(worst, pen)
                half = 0.5 * pen / d
                a.pose = Pose2D(a.pose.x - dx * half, a.pose.y - dy * half,
                                a.pose.theta)
                b.pose = Pose2D(b.pose.x + dx * half, b.pose.y + dy * half,
                                b.pose.theta)
                displaced.add(a.entity)
                displaced.add(b.entity)
            for robot in self.robots:
                px, py = robot.pose.x, robot.pose.y
                moved_here = False
                for obj in self.objects:
                    dx = px - obj.x
                    dy = py - obj.y
                    min_d = robot.radius + obj.radius
                    d2 = dx * dx + dy * dy
                    if d2 >= min_d * min_d:
                        continue
                    d = math.sqrt(d2)
                    if d < 1e-12:
                        dx, dy, d = 1.0, 0.0, 1.0
                    pen = min_d - d
                    worst = max(worst, pen)
                    px += dx / d * pen
                    py += dy / d * pen
                    moved_here = True
                for (ax, ay), (bx, by) in self._wall_segments:
                    qx, qy, _ = closest_point_on_segment(px, py, ax, ay, bx, by)
                    dx = px - qx
                    dy = py - qy
                    d2 = dx * dx + dy * dy
                    if d2 >= robot.radius * robot.radius:
                        continue
                    d = math.sqrt(d2)
                    if d < 1e-12:
                        continue  # center exactly on the wall: leave to next pass
                    pen = robot.radius - d
                    worst = max(worst, pen)
                    px += dx / d * pen
                    py += dy / d * pen
                    moved_here = True
                cx, cy = clamp_disc_in_polygon(px, py, robot.radius, self.arena)
                if cx != px or cy != py:
                    px, py = cx, cy
                    moved_here = True
                if moved_here:
                    robot.pose = Pose2D(px, py, robot.pose.theta)
                    displaced.add(robot.entity)
            if worst <= 1e-9:
                break
        return displaced

    def step(self, commands: list[dict] | None = None) -> None:
        t = self.tick
        controller_due = t % self.controller_every == 0
        sample_due = t % self.sample_every == 0
        beacons_due = any((t - w.beacon_offset) % w.beacon_every == 0
                          for w in self.walls)
        if not beacons_due:
            beacons_due = any(o.beacon_every > 0
                              and (t - o.beacon_offset) % o.beacon_every == 0
                              for o in self.objects)
        if (not commands and not controller_due and not sample_due
                and not beacons_due and not self._shower_emits
                and not self._active and self._pending == 0):
            self.tick = t + 1
            return

        self._phase = 1
        if commands:
            for command in commands:
                self.apply_command(command)

        self._phase = 2
        if controller_due:
            if self._pending_swaps:
                self._apply_swaps()
            for robot in self.robots:
                run_controller_tick(self, robot)
                if robot.pending_sends:
                    for payload, mask, msg_type in robot.pending_sends:
                        self._emit_robot_frame(robot, payload, mask, msg_type)
                    robot.pending_sends.clear()

        self._phase = 3
        moved = self._integrate_motion(controller_due)

        self._phase = 4
        objects_moved = self._push_objects() if self.objects else False
        displaced: set[int] = set()
        if moved or objects_moved:
            displaced = self._resolve_collisions()
            self._geom_epoch += 1
        for robot in moved:
            displaced.add(robot.entity)
        for entity in sorted(displaced):
            robot = self._robot_by_entity.get(entity)
            if robot is None:
                continue
            last_tick, last_pose = robot.move_log[-1]
            if last_pose is not robot.pose:
                robot.move_log.append((t, robot.pose))
                if len(robot.move_log) > _MAX_POSE_LOG:
                    del robot.move_log[0]

        self._phase = 5
        if beacons_due:
            for wall in self.walls:
                if (t - wall.beacon_offset) % wall.beacon_every == 0:
                    self._emit_wall_beacon(wall)
            for obj in self.objects:
                if obj.beacon_every > 0 and (t - obj.beacon_offset) % obj.beacon_every == 0:
                    self._emit_object_beacon(obj)
        if self._shower_emits:
            for code, extra in self._shower_emits:
                self._emit_shower_signal(code, extra)
            self._shower_emits.clear()
        self._deliver_due()

        self._phase = 7
        if sample_due:
            for robot in self.robots:
                pose = robot.pose
                self.writer.add(t, 7, "pose", robot.entity,
                                {"x": pose.x, "y": pose.y, "theta": pose.theta})
            for obj in self.objects:
                self.writer.add(t, 7, "pose", obj.entity,
                                {"x": obj.x, "y": obj.y})
            if self.shower is not None:
                pose = self.shower.pose
                self.writer.add(t, 7, "pose", self.shower.entity,
                                {"x": pose.x, "y": pose.y, "theta": pose.theta})
            # only replay-derivable values belong here; recomputing these two
            # from frame_rx/frame_drop/signal records must give equal numbers
            self.writer.add(t, 7, "metric", None,
                            {"delivered": self._delivered_window,
                             "dropped": self._dropped_window})
            self._delivered_window = 0
            self._dropped_window = 0

        self.writer.end_tick()
        self.tick = t + 1

    def run(self, ticks: int, script: list[tuple[int, dict]] | None = None) -> None:
        """Advance `ticks` steps, injecting scripted commands at their ticks."""
        queue = sorted(script, key=lambda item: item[0]) if script else []
        qi = 0
        end = self.tick + ticks
        while self.tick < end:
            commands = None
            while qi < len(queue) and queue[qi][0] <= self.tick:
                if commands is None:
                    commands = []
                commands.append(queue[qi][1])
                qi += 1
            self.step(commands)

    def close(self) -> str:
        return self.writer.close()

    # ------------------------------------------------------------- querying

    def inspect_robot(self, entity: int) -> dict | None:
        robot = self._robot_by_entity.get(entity)
        if robot is None:
            return None
        slot = robot.slot
        return {
            "id": robot.entity,
            "program": slot.program_id,
            "halted": slot.halted,
            "ticks_since_swap": slot.ticks_since_swap,
            "state": _jsonable(slot.user_state),
            "pose": [robot.pose.x, robot.pose.y, robot.pose.theta],
            "duties": [robot.duties.left, robot.duties.right],
            "queued_frames": [len(q) for q in robot.recv_queues],
            "queued_signals": len(robot.signal_queue),
        }

    def snapshot(self) -> dict:
        return {
            "tick": self.tick,
            "time_s": self.tick * self.dt,
            "arena": [[x, y] for x, y in self.arena],
            "robots": [
                {
                    "id": r.entity,
                    "x": r.pose.x, "y": r.pose.y, "theta": r.pose.theta,
                    "radius": r.radius,
                    "program": r.slot.program_id,
                    "halted": r.slot.halted,
                    "head_led": list(r.head_led),
                    "belly": [list(c) for c in r.belly_leds],
                    "duties": [r.duties.left, r.duties.right],
                }
                for r in self.robots
            ],
            "objects": [
                {"id": o.entity, "object_id": o.object_id,
                 "x": o.x, "y": o.y, "radius": o.radius, "movable": o.movable}
                for o in self.objects
            ],
            "walls": [
                {"id": w.entity, "wall_id": w.wall_id,
                 "p1": [w.x1, w.y1], "p2": [w.x2, w.y2]}
                for w in self.walls
            ],
            "shower": None if self.shower is None else {
                "id": self.shower.entity,
                "x": self.shower.pose.x, "y": self.shower.pose.y,
                "theta": self.shower.pose.theta,
                "cone_half_angle": self.shower.cone_half_angle,
                "range": self.shower.range_m,
            },
            "lights": [
                {"x": s.x, "y": s.y, "power": s.power, "kind": s.kind}
                for s in self.lights
            ],
            "in_flight": self._pending,
            "stats": {
                "delivered": self.delivered_total,
                "dropped": self.dropped_total,
                "transmitted": self.tx_total,
            },
        }
