"""Controller hosting: the firmware-shaped API that user programs run against.

A program is a small stateless object; all of its state lives in the slot's
user_state dict so hot swaps can rebuild it from scratch. One controller
exception halts that robot and logs an error; the world keeps stepping.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .irnet import ALL_FACES_MASK, MAX_PAYLOAD, MsgType, SENDS_PER_TICK_CAP
from .sensing import ImuSample

MAX_SIGNAL_PAYLOAD = 16


@dataclass(frozen=True, slots=True)
class IrMessage:
    sender: int
    seq: int
    msg_type: int
    face: int
    payload: bytes


@dataclass(frozen=True, slots=True)
class UserSignal:
    code: int
    payload: bytes = b""
    origin: str = "script"  # "shower" | "wall" | "script"

    def __post_init__(self) -> None:
        if not 0 <= self.code <= 255:
            raise ValueError("signal code must fit a byte")
        if len(self.payload) > MAX_SIGNAL_PAYLOAD:
            raise ValueError(f"signal payload exceeds {MAX_SIGNAL_PAYLOAD} bytes")


PROGRAM_REGISTRY: dict[str, Callable[[], "object"]] = {}


def register_program(name: str):
    def wrap(cls):
        cls.name = name
        PROGRAM_REGISTRY[name] = cls
        return cls
    return wrap


def create_program(name: str):
    cls = PROGRAM_REGISTRY.get(name)
    return cls() if cls is not None else None


def program_names() -> list[str]:
    return sorted(PROGRAM_REGISTRY)


@dataclass(slots=True)
class ControllerSlot:
    program_id: str
    program: object | None = None
    user_state: dict = field(default_factory=dict)
    ticks_since_swap: int = 0
    halted: bool = False


class RobotApi:
    """What a program sees: clock, radio, motors, LEDs, sensors, randomness."""

    __slots__ = ("_world", "_robot")

    def __init__(self, world, robot):
        self._world = world
        self._robot = robot

    # --- identity and clock ---
    @property
    def robot_id(self) -> int:
        return self._robot.entity

    def millis(self) -> int:
        return int(round(self._world.tick * self._world.dt * 1000.0))

    def motion_limits(self) -> tuple[float, float]:
        p = self._robot.motion
        return p.v_max, p.omega_max

    # --- IR messaging ---
    def recv(self, face: int | None = None) -> IrMessage | None:
        robot = self._robot
        if face is not None:
            queue = robot.recv_queues[face]
            return queue.popleft() if queue else None
        for queue in robot.recv_queues:
            if queue:
                return queue.popleft()
        return None

    def send(self, payload: bytes, faces: int = ALL_FACES_MASK,
             msg_type: int = MsgType.USER) -> bool:
        robot = self._robot
        if robot.sent_this_tick >= SENDS_PER_TICK_CAP:
            return False
        if not 0 < faces <= ALL_FACES_MASK or len(payload) > MAX_PAYLOAD:
            return False
        robot.sent_this_tick += 1
        robot.pending_sends.append((bytes(payload), faces, int(msg_type)))
        return True

    def pop_signal(self) -> UserSignal | None:
        queue = self._robot.signal_queue
        return queue.popleft() if queue else None

    # --- actuation ---
    def set_motors(self, left: float, right: float, aux: float = 0.0) -> None:
        self._world.set_robot_motors(self._robot, left, right, aux)

    def motors(self) -> tuple[float, float]:
        cmd = self._robot.duties
        return cmd.left, cmd.right

    def set_head_led(self, r: int, g: int, b: int) -> None:
        self._world.set_robot_led(self._robot, "head", (int(r), int(g), int(b)))

    def set_belly_led(self, face: int, r: int, g: int, b: int) -> None:
        self._world.set_robot_led(self._robot, int(face), (int(r), int(g), int(b)))

    # --- sensing ---
    def photosensors(self) -> tuple[int, int, int]:
        return self._world.robot_photosensors(self._robot)

    def imu(self) -> ImuSample:
        return self._world.robot_imu(self._robot)

    # --- randomness ---
    def random(self) -> float:
        return self._robot.rng_controller.uniform()

    def random_range(self, lo: float, hi: float) -> float:
        return self._robot.rng_controller.uniform_range(lo, hi)

    def random_exponential(self, mean: float) -> float:
        return self._robot.rng_controller.exponential(mean)


def run_controller_tick(world, robot) -> None:
    """Execute one controller period for one robot, isolating failures."""
    slot = robot.slot
    if slot.halted or slot.program is None:
        return
    api = robot.api
    robot.sent_this_tick = 0
    program = slot.program
    try:
        hook = getattr(program, "on_signal", None)
        if hook is not None:
            while robot.signal_queue:
                hook(api, slot.user_state, robot.signal_queue.popleft())
        program.step(api, slot.user_state)
    except Exception as exc:  # noqa: BLE001 - one robot must not sink the run
        slot.halted = True
        robot.pending_sends.clear()
        world.set_robot_motors(robot, 0.0, 0.0, 0.0)
        world.log_error(robot.entity, f"controller fault: {exc!r}")
    slot.ticks_since_swap += 1
