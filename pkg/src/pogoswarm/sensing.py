"""Light sensing and inertial readouts.

Photosensors sample a scalar irradiance field built from ambient terms and
inverse-square point emitters; readings are noised, clamped and quantized to
16 bits like the ADC they mimic. The IMU is a finite-difference observer of
the robot's own pose history, which keeps it exactly consistent with the
motion the physics produced.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import Pose2D, angle_diff
from .rng import RngStream

EPS_FALLOFF = 1e-4  # m^2, keeps the field finite at the emitter itself
ADC_MAX = 65535

# body-frame mount bearings: front-left, front-right, back
PHOTO_AZIMUTHS = (math.radians(45.0), math.radians(-45.0), math.pi)
PHOTO_MOUNT_RADIUS = 0.025  # m


@dataclass(frozen=True, slots=True)
class LightSource:
    x: float
    y: float
    power: float
    kind: str = "point"  # "point" | "ambient"


@dataclass(slots=True)
class SensingParams:
    noise_light: float = 0.02    # multiplicative, std
    i_sat: float = 4.0           # intensity mapped to full scale
    noise_accel: float = 0.05    # m/s^2, additive std per axis
    noise_gyro: float = 0.01     # rad/s, additive std
    cosine_weighting: bool = False


@dataclass(frozen=True, slots=True)
class ImuSample:
    accel_x: float
    accel_y: float
    gyro_z: float
    tick: int


def light_intensity_at(x: float, y: float, sources: list[LightSource]) -> float:
    total = 0.0
    for src in sources:
        if src.kind == "ambient":
            total += src.power
        else:
            d2 = (x - src.x) ** 2 + (y - src.y) ** 2
            total += src.power / (EPS_FALLOFF + d2)
    return total


def photo_positions(pose: Pose2D) -> list[tuple[float, float, float]]:
    """World position and outward bearing of each photosensor."""
    out = []
    for az in PHOTO_AZIMUTHS:
        world_az = pose.theta + az
        out.append((
            pose.x + PHOTO_MOUNT_RADIUS * math.cos(world_az),
            pose.y + PHOTO_MOUNT_RADIUS * math.sin(world_az),
            world_az,
        ))
    return out


def _directional_intensity(
    sx: float, sy: float, outward: float, sources: list[LightSource], cosine: bool
) -> float:
    if not cosine:
        return light_intensity_at(sx, sy, sources)
    total = 0.0
    for src in sources:
        if src.kind == "ambient":
            total += src.power
            continue
        dx, dy = src.x - sx, src.y - sy
        d2 = dx * dx + dy * dy
        w = 1.0
        if d2 > 0.0:
            incidence = math.atan2(dy, dx)
            w = max(0.0, math.cos(angle_diff(incidence, outward)))
        total += w * src.power / (EPS_FALLOFF + d2)
    return total


def quantize_reading(intensity: float, i_sat: float) -> int:
    if intensity <= 0.0:
        return 0
    if intensity >= i_sat:
        return ADC_MAX
    return int(ADC_MAX * intensity / i_sat)


def read_photosensors(
    pose: Pose2D,
    sources: list[LightSource],
    params: SensingParams,
    rng: RngStream,
) -> tuple[int, int, int]:
    """(front_left, front_right, back) quantized to 0..65535."""
    readings = []
    for sx, sy, outward in photo_positions(pose):
        value = _directional_intensity(sx, sy, outward, sources, params.cosine_weighting)
        if params.noise_light > 0.0:
            value *= 1.0 + rng.normal(params.noise_light)
        readings.append(quantize_reading(value, params.i_sat))
    return readings[0], readings[1], readings[2]


def read_imu(
    current: Pose2D,
    prev: Pose2D | None,
    prev2: Pose2D | None,
    dt: float,
    params: SensingParams,
    rng: RngStream,
    tick: int,
) -> ImuSample:
    """Second difference of position (body frame) and first difference of heading."""
    if prev is None or prev2 is None:
        return ImuSample(0.0, 0.0, 0.0, tick)
    inv_dt2 = 1.0 / (dt * dt)
    ax_w = (current.x - 2.0 * prev.x + prev2.x) * inv_dt2
    ay_w = (current.y - 2.0 * prev.y + prev2.y) * inv_dt2
    c = math.cos(current.theta)
    s = math.sin(current.theta)
    ax = c * ax_w + s * ay_w
    ay = -s * ax_w + c * ay_w
    gyro = angle_diff(current.theta, prev.theta) / dt
    if params.noise_accel > 0.0:
        ax += rng.normal(params.noise_accel)
        ay += rng.normal(params.noise_accel)
    if params.noise_gyro > 0.0:
        gyro += rng.normal(params.noise_gyro)
    return ImuSample(ax, ay, gyro, tick)
