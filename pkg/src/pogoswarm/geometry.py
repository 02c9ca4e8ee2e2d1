"""Planar geometry primitives shared by the physics and IR layers."""
from __future__ import annotations

import math
from dataclasses import dataclass

TWO_PI = 2.0 * math.pi


def normalize_angle(theta: float) -> float:
    """Wrap an angle to [-pi, pi). The upper bound maps to -pi."""
    if -math.pi <= theta < math.pi:
        return theta
    t = math.fmod(theta + math.pi, TWO_PI)
    if t < 0.0:
        t += TWO_PI
    return t - math.pi


@dataclass(frozen=True, slots=True)
class Pose2D:
    x: float
    y: float
    theta: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    def moved(self, x: float, y: float, theta: float) -> "Pose2D":
        return Pose2D(x, y, theta)


def angle_diff(a: float, b: float) -> float:
    """Smallest signed angle taking b to a."""
    return normalize_angle(a - b)


def angle_in_cone(angle: float, axis: float, half_width: float) -> bool:
    return abs(angle_diff(angle, axis)) <= half_width


def bearing_from(pose: Pose2D, px: float, py: float) -> float:
    """Bearing of a world point in the pose's body frame."""
    return normalize_angle(math.atan2(py - pose.y, px - pose.x) - pose.theta)


def closest_point_on_segment(
    px: float, py: float, ax: float, ay: float, bx: float, by: float
) -> tuple[float, float, float]:
    """Closest point to p on segment ab; returns (qx, qy, t) with q = a + t*(b-a)."""
    dx = bx - ax
    dy = by - ay
    seg2 = dx * dx + dy * dy
    if seg2 <= 0.0:
        return ax, ay, 0.0
    t = ((px - ax) * dx + (py - ay) * dy) / seg2
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    return ax + t * dx, ay + t * dy, t


def point_segment_distance(
    px: float, py: float, ax: float, ay: float, bx: float, by: float
) -> float:
    qx, qy, _ = closest_point_on_segment(px, py, ax, ay, bx, by)
    return math.hypot(px - qx, py - qy)


def segment_hits_disc(
    ax: float, ay: float, bx: float, by: float, cx: float, cy: float, radius: float
) -> bool:
    """True when segment ab passes strictly inside the disc at c."""
    return point_segment_distance(cx, cy, ax, ay, bx, by) < radius


def segments_intersect(
    ax: float, ay: float, bx: float, by: float,
    cx: float, cy: float, dx: float, dy: float,
) -> bool:
    """Proper or touching intersection of segments ab and cd."""
    def orient(ox: float, oy: float, px: float, py: float, qx: float, qy: float) -> float:
        return (px - ox) * (qy - oy) - (py - oy) * (qx - ox)

    d1 = orient(cx, cy, dx, dy, ax, ay)
    d2 = orient(cx, cy, dx, dy, bx, by)
    d3 = orient(ax, ay, bx, by, cx, cy)
    d4 = orient(ax, ay, bx, by, dx, dy)
    if ((d1 > 0) != (d2 > 0) or d1 == 0 or d2 == 0) and (
        (d3 > 0) != (d4 > 0) or d3 == 0 or d4 == 0
    ):
        # collinear/degenerate cases fall through to bounding-box checks
        if d1 == 0 and d2 == 0 and d3 == 0 and d4 == 0:
            return (
                min(ax, bx) <= max(cx, dx) and min(cx, dx) <= max(ax, bx)
                and min(ay, by) <= max(cy, dy) and min(cy, dy) <= max(ay, by)
            )
        return True
    return False


def polygon_signed_area(points: list[tuple[float, float]]) -> float:
    area = 0.0
    n = len(points)
    for i in range(n):
        x0, y0 = points[i]
        x1, y1 = points[(i + 1) % n]
        area += x0 * y1 - x1 * y0
    return 0.5 * area


def ensure_ccw(points: list[tuple[float, float]]) -> list[tuple[float, float]]:
    if polygon_signed_area(points) < 0.0:
        return list(reversed(points))
    return list(points)


def point_in_polygon(px: float, py: float, points: list[tuple[float, float]]) -> bool:
    """Even-odd rule; boundary points count as inside within float tolerance."""
    inside = False
    n = len(points)
    for i in range(n):
        ax, ay = points[i]
        bx, by = points[(i + 1) % n]
        if (ay > py) != (by > py):
            t = (py - ay) / (by - ay)
            xcross = ax + t * (bx - ax)
            if px < xcross:
                inside = not inside
        # exact boundary hit
        if point_segment_distance(px, py, ax, ay, bx, by) <= 1e-12:
            return True
    return inside


def nearest_polygon_edge(
    px: float, py: float, points: list[tuple[float, float]]
) -> tuple[float, float, int]:
    """Nearest boundary point and the index of the edge that holds it."""
    best = (points[0][0], points[0][1], 0)
    best_d = float("inf")
    n = len(points)
    for i in range(n):
        ax, ay = points[i]
        bx, by = points[(i + 1) % n]
        qx, qy, _ = closest_point_on_segment(px, py, ax, ay, bx, by)
        d = math.hypot(px - qx, py - qy)
        if d < best_d:
            best_d = d
            best = (qx, qy, i)
    return best


def clamp_disc_in_polygon(
    px: float, py: float, radius: float, points: list[tuple[float, float]]
) -> tuple[float, float]:
    """Push a disc center so the disc sits inside a CCW polygon.

    Local edge pushout handles the common grazing case; a center that has
    escaped entirely is projected back through the nearest edge.
    """
    if not point_in_polygon(px, py, points):
        qx, qy, i = nearest_polygon_edge(px, py, points)
        ax, ay = points[i]
        bx, by = points[(i + 1) % len(points)]
        ex, ey = bx - ax, by - ay
        norm = math.hypot(ex, ey) or 1.0
        # interior lies left of each CCW edge
        nx, ny = -ey / norm, ex / norm
        px, py = qx + nx * radius, qy + ny * radius
    n = len(points)
    for i in range(n):
        ax, ay = points[i]
        bx, by = points[(i + 1) % n]
        qx, qy, _ = closest_point_on_segment(px, py, ax, ay, bx, by)
        dx, dy = px - qx, py - qy
        d = math.hypot(dx, dy)
        if d >= radius:
            continue
        if d > 1e-12:
            push = radius - d
            px += dx / d * push
            py += dy / d * push
        else:
            ex, ey = bx - ax, by - ay
            norm = math.hypot(ex, ey) or 1.0
            px += -ey / norm * radius
            py += ex / norm * radius
    return px, py


def polygon_bounds(points: list[tuple[float, float]]) -> tuple[float, float, float, float]:
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    return min(xs), min(ys), max(xs), max(ys)
