"""Directional infrared messaging.

Four emitter/receiver pairs per robot, one per face, with transmit and
receive cones. A transmission occupies the air for its serialization time;
receptions whose windows overlap at one receiving face are resolved by the
configured collision policy. There is no carrier sense and no retry: senders
that talk over each other simply lose frames, which is what makes saturated
channels collapse.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

from .geometry import Pose2D, angle_in_cone, normalize_angle, segment_hits_disc, segments_intersect

MAX_PAYLOAD = 64
HEADER_BYTES = 8
RECV_QUEUE_CAP = 32
SENDS_PER_TICK_CAP = 4


class FaceId(IntEnum):
    FRONT = 0
    LEFT = 1
    BACK = 2
    RIGHT = 3


class MsgType(IntEnum):
    USER = 0
    WALL_BEACON = 1
    SHOWER_SIGNAL = 2
    PROGRAM = 3


ALL_FACES = (FaceId.FRONT, FaceId.LEFT, FaceId.BACK, FaceId.RIGHT)
ALL_FACES_MASK = 0b1111
_HALF_PI = math.pi / 2.0


def face_azimuth(face: int) -> float:
    """Face boresight in the body frame: FRONT 0, LEFT +90, BACK 180, RIGHT 270."""
    return normalize_angle(face * _HALF_PI)


def mask_faces(mask: int) -> list[FaceId]:
    return [f for f in ALL_FACES if mask & (1 << f)]


@dataclass(slots=True)
class ChannelParams:
    range_m: float = 0.25
    tx_half_angle: float = math.radians(60.0)
    rx_half_angle: float = math.radians(60.0)
    bitrate: float = 76800.0
    header_bytes: int = HEADER_BYTES
    collision_policy: str = "destructive"  # "destructive" | "capture"


def airtime(payload_len: int, params: ChannelParams) -> float:
    """Seconds on air: header + payload + 16-bit CRC at the configured bitrate."""
    return (params.header_bytes + payload_len + 2) * 8.0 / params.bitrate


def crc16_ccitt(data: bytes) -> int:
    """CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection."""
    crc = 0xFFFF
    for byte in data:
        crc ^= byte << 8
        for _ in range(8):
            if crc & 0x8000:
                crc = ((crc << 1) ^ 0x1021) & 0xFFFF
            else:
                crc = (crc << 1) & 0xFFFF
    return crc


@dataclass(frozen=True, slots=True)
class IrFrame:
    sender: int
    seq: int
    msg_type: int
    tx_face_mask: int
    payload: bytes

    def __post_init__(self) -> None:
        if len(self.payload) > MAX_PAYLOAD:
            raise ValueError(f"payload exceeds {MAX_PAYLOAD} bytes")


def encode_frame(frame: IrFrame) -> bytes:
    head = bytes((
        frame.sender & 0xFF, (frame.sender >> 8) & 0xFF,
        frame.seq & 0xFF, (frame.seq >> 8) & 0xFF,
        frame.msg_type & 0xFF,
        frame.tx_face_mask & 0x0F,
        len(frame.payload) & 0xFF,
        0,
    ))
    body = head + frame.payload
    crc = crc16_ccitt(body)
    return body + bytes((crc & 0xFF, (crc >> 8) & 0xFF))


def decode_frame(data: bytes) -> IrFrame:
    if len(data) < HEADER_BYTES + 2:
        raise ValueError("frame shorter than header")
    length = data[6]
    if len(data) != HEADER_BYTES + length + 2:
        raise ValueError("frame length field mismatch")
    crc = data[-2] | (data[-1] << 8)
    if crc != crc16_ccitt(data[:-2]):
        raise ValueError("bad checksum")
    return IrFrame(
        sender=data[0] | (data[1] << 8),
        seq=data[2] | (data[3] << 8),
        msg_type=data[4],
        tx_face_mask=data[5],
        payload=bytes(data[HEADER_BYTES:-2]),
    )


def reachable_faces(
    tx_pose: Pose2D,
    tx_face: int,
    rx_pose: Pose2D,
    params: ChannelParams,
    occluder_discs: tuple = (),
    occluder_segments: tuple = (),
) -> tuple[FaceId, ...]:
    """Receiving faces of rx illuminated by one tx face, or () if unreachable.

    Occluders must already exclude the two endpoint bodies. Adjacent receive
    cones overlap, so a diagonal arrival can land on two faces at once.
    """
    dx = rx_pose.x - tx_pose.x
    dy = rx_pose.y - tx_pose.y
    dist = math.hypot(dx, dy)
    if dist > params.range_m or dist == 0.0:
        return ()
    out_bearing = normalize_angle(math.atan2(dy, dx) - tx_pose.theta)
    if not angle_in_cone(out_bearing, face_azimuth(tx_face), params.tx_half_angle):
        return ()
    for ox, oy, orad in occluder_discs:
        if segment_hits_disc(tx_pose.x, tx_pose.y, rx_pose.x, rx_pose.y, ox, oy, orad):
            return ()
    for (sx1, sy1), (sx2, sy2) in occluder_segments:
        if segments_intersect(tx_pose.x, tx_pose.y, rx_pose.x, rx_pose.y, sx1, sy1, sx2, sy2):
            return ()
    in_bearing = normalize_angle(math.atan2(-dy, -dx) - rx_pose.theta)
    return tuple(
        f for f in ALL_FACES
        if angle_in_cone(in_bearing, face_azimuth(f), params.rx_half_angle)
    )


@dataclass(slots=True)
class Reception:
    """One frame's arrival opportunity at a single receiving face."""
    frame: IrFrame
    t_start: float
    t_end: float
    distance: float
    tx_x: float
    tx_y: float
    rx_pose: Pose2D
    delivered: bool | None = None  # filled in by arbitration


def _windows_overlap(a: Reception, b: Reception) -> bool:
    # half-open windows: frames that merely touch do not interfere
    return a.t_start < b.t_end and b.t_start < a.t_end


def _capture_winner(rec: Reception, rivals: list[Reception]) -> bool:
    for other in rivals:
        if other.distance <= rec.distance:
            return False
    return all(
        other.t_start >= rec.t_start and other.t_end <= rec.t_end
        for other in rivals
    )


def decide_delivery(rec: Reception, rivals: list[Reception], policy: str) -> bool:
    """Fate of one reception given every overlapping rival at the same face."""
    if not rivals:
        return True
    if policy == "destructive":
        return False
    if policy == "capture":
        return _capture_winner(rec, rivals)
    raise ValueError(f"unknown collision policy {policy!r}")


def arbitrate(receptions: list[Reception], policy: str) -> list[Reception]:
    """Resolve one face's receptions; returns the delivered subset in time order."""
    delivered = []
    for rec in receptions:
        rivals = [o for o in receptions if o is not rec and _windows_overlap(rec, o)]
        rec.delivered = decide_delivery(rec, rivals, policy)
        if rec.delivered:
            delivered.append(rec)
    delivered.sort(key=lambda r: (r.t_end, r.frame.sender, r.frame.seq))
    return delivered


@dataclass(slots=True)
class FaceTimeline:
    """Rolling reception history for one (receiver, face) pair."""
    receptions: list[Reception] = field(default_factory=list)
    max_window: float = 0.0

    def add(self, rec: Reception) -> None:
        self.max_window = max(self.max_window, rec.t_end - rec.t_start)
        self.receptions.append(rec)

    def finish_until(self, now: float, policy: str) -> tuple[list[Reception], list[Reception]]:
        """Resolve receptions whose windows have closed by `now`.

        A reception is decidable once every window it overlaps is known, which
        is guaranteed at its end time because transmissions only start in the
        past. Returns (delivered, collided); both resolved lists are pruned
        once nothing still on the air can overlap them.
        """
        delivered: list[Reception] = []
        collided: list[Reception] = []
        eps = 1e-12
        for rec in self.receptions:
            if rec.delivered is None and rec.t_end <= now + eps:
                rivals = [
                    o for o in self.receptions if o is not rec and _windows_overlap(rec, o)
                ]
                rec.delivered = decide_delivery(rec, rivals, policy)
                (delivered if rec.delivered else collided).append(rec)
        if delivered or collided:
            delivered.sort(key=lambda r: (r.t_end, r.frame.sender, r.frame.seq))
            collided.sort(key=lambda r: (r.t_end, r.frame.sender, r.frame.seq))
        # a resolved entry can still be a rival for a window that opened up to
        # one max airtime ago, so retain exactly that horizon
        horizon = now - self.max_window - eps
        self.receptions = [
            r for r in self.receptions
            if r.delivered is None or r.t_end > horizon
        ]
        return delivered, collided
