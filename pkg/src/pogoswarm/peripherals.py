"""Bench peripherals: programming shower, beacon walls, pushable objects.

The shower is a hand-held cone projector used to retarget groups of robots
at runtime; walls advertise their identity on a fixed period; objects are
passive discs that only move when enough robots press into them at once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import (
    Pose2D,
    angle_in_cone,
    closest_point_on_segment,
    normalize_angle,
    segment_hits_disc,
    segments_intersect,
)

SHOWER_CONE_HALF_ANGLE = math.radians(30.0)
SHOWER_RANGE = 0.5          # m
SHOWER_BODY_RADIUS = 0.05   # m, 100 mm across
SHOWER_EMITTERS = 10        # cosmetic only; the cone is what matters
WALL_BEACON_PERIOD = 0.5    # s
WALL_EMIT_RANGE = 0.25      # m
OBJECT_PUSH_THRESHOLD = 2
OBJECT_V_MAX = 0.03         # m/s


@dataclass(slots=True)
class ShowerState:
    entity: int
    pose: Pose2D
    cone_half_angle: float = SHOWER_CONE_HALF_ANGLE
    range_m: float = SHOWER_RANGE
    radius: float = SHOWER_BODY_RADIUS
    emitters: int = SHOWER_EMITTERS
    seq: int = 0


@dataclass(slots=True)
class WallState:
    entity: int
    wall_id: int
    x1: float
    y1: float
    x2: float
    y2: float
    beacon_every: int      # ticks
    beacon_offset: int     # ticks, staggers walls apart
    emit_range: float = WALL_EMIT_RANGE
    seq: int = 0

    @property
    def outward(self) -> tuple[float, float]:
        """Unit normal on the emitting side: left of the p1->p2 direction."""
        dx, dy = self.x2 - self.x1, self.y2 - self.y1
        norm = math.hypot(dx, dy) or 1.0
        return -dy / norm, dx / norm

    def segment(self) -> tuple[tuple[float, float], tuple[float, float]]:
        return (self.x1, self.y1), (self.x2, self.y2)


@dataclass(slots=True)
class PogobjectState:
    entity: int
    object_id: int
    x: float
    y: float
    radius: float
    movable: bool = True
    push_threshold: int = OBJECT_PUSH_THRESHOLD
    v_max: float = OBJECT_V_MAX
    beacon_every: int = 0      # ticks; 0 disables the presence beacon
    beacon_offset: int = 0
    seq: int = 0


BEACON_KIND_WALL = 0
BEACON_KIND_OBJECT = 1


def beacon_payload(kind: int, ident: int) -> bytes:
    """Presence beacon body: one kind byte, then the id as u16 LE."""
    return bytes((kind, ident & 0xFF, (ident >> 8) & 0xFF))


def parse_beacon(payload: bytes) -> tuple[str, int] | None:
    """Inverse of beacon_payload; None for payloads that are not beacons."""
    if len(payload) != 3 or payload[0] not in (BEACON_KIND_WALL, BEACON_KIND_OBJECT):
        return None
    kind = "wall" if payload[0] == BEACON_KIND_WALL else "object"
    return kind, payload[1] | (payload[2] << 8)


def shower_cone_hit(shower: ShowerState, px: float, py: float) -> bool:
    """Range plus cone membership for a single point, aim taken from pose.theta."""
    dx, dy = px - shower.pose.x, py - shower.pose.y
    dist = math.hypot(dx, dy)
    if dist > shower.range_m or dist == 0.0:
        return False
    bearing = normalize_angle(math.atan2(dy, dx) - shower.pose.theta)
    return angle_in_cone(bearing, 0.0, shower.cone_half_angle)


def shower_cone_targets(
    shower: ShowerState,
    robots: list,  # objects with .entity and .pose
    occluder_discs: list[tuple[float, float, float, int]],
    occluder_segments: tuple = (),
) -> list[int]:
    """Robot entities the cone can actually see, nearest first.

    occluder_discs rows are (x, y, radius, owner_entity); the candidate robot
    itself never blocks its own illumination.
    """
    hits: list[tuple[float, int]] = []
    sx, sy = shower.pose.x, shower.pose.y
    for robot in robots:
        px, py = robot.pose.x, robot.pose.y
        if not shower_cone_hit(shower, px, py):
            continue
        blocked = False
        for ox, oy, orad, owner in occluder_discs:
            if owner == robot.entity:
                continue
            if segment_hits_disc(sx, sy, px, py, ox, oy, orad):
                blocked = True
                break
        if not blocked:
            for (ax, ay), (bx, by) in occluder_segments:
                if segments_intersect(sx, sy, px, py, ax, ay, bx, by):
                    blocked = True
                    break
        if not blocked:
            hits.append((math.hypot(px - sx, py - sy), robot.entity))
    hits.sort()
    return [entity for _, entity in hits]


def wall_emission_point(
    wall: WallState, rx_x: float, rx_y: float
) -> tuple[float, float, float] | None:
    """Beacon origin for one receiver: nearest segment point, outward side only.

    Returns (qx, qy, distance) or None when the receiver is behind the wall
    or beyond its emission range.
    """
    qx, qy, _ = closest_point_on_segment(rx_x, rx_y, wall.x1, wall.y1, wall.x2, wall.y2)
    dx, dy = rx_x - qx, rx_y - qy
    dist = math.hypot(dx, dy)
    if dist > wall.emit_range or dist == 0.0:
        return None
    nx, ny = wall.outward
    if dx * nx + dy * ny <= 0.0:
        return None
    return qx, qy, dist


def object_emission_point(
    obj: PogobjectState, rx_x: float, rx_y: float, emit_range: float
) -> tuple[float, float, float] | None:
    """Beacon origin on the object's rim facing one receiver, or None."""
    dx, dy = rx_x - obj.x, rx_y - obj.y
    d = math.hypot(dx, dy)
    if d <= obj.radius:
        return None
    dist = d - obj.radius
    if dist > emit_range:
        return None
    qx = obj.x + dx / d * obj.radius
    qy = obj.y + dy / d * obj.radius
    return qx, qy, dist


def object_push_velocity(
    obj: PogobjectState,
    contacts: list[tuple[float, float, float]],
) -> tuple[float, float] | None:
    """Translation velocity for one tick of pushing, or None below threshold.

    contacts rows are (unit_x, unit_y, approach_speed) per pressing robot,
    with the unit vector pointing from the robot toward the object center.
    """
    if not obj.movable or len(contacts) < obj.push_threshold:
        return None
    mean_speed = sum(c[2] for c in contacts) / len(contacts)
    speed = min(mean_speed, obj.v_max)
    mx = sum(c[0] for c in contacts) / len(contacts)
    my = sum(c[1] for c in contacts) / len(contacts)
    norm = math.hypot(mx, my)
    if norm < 1e-12 or speed <= 0.0:
        return None
    return mx / norm * speed, my / norm * speed
