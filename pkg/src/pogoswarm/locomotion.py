"""Motion models: ideal differential drive and noisy vibration drive.

Both reduce to constant (v, omega) over one physics step and integrate the
unicycle exactly along the arc, so step size changes rounding only, not the
path. Vibration noise is drawn once per controller period by the caller and
held constant in between.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import Pose2D, normalize_angle
from .rng import RngStream

V_MAX_DEFAULT = 0.06          # m/s
OMEGA_MAX_DEFAULT = math.pi   # rad/s
WHEEL_BASE_DEFAULT = 0.05     # m


@dataclass(frozen=True, slots=True)
class MotorCommand:
    left: float
    right: float
    aux: float = 0.0


@dataclass(slots=True)
class MotionModelParams:
    model: str = "vibration"  # "vibration" | "differential"
    v_max: float = V_MAX_DEFAULT
    omega_max: float = OMEGA_MAX_DEFAULT
    wheel_base: float = WHEEL_BASE_DEFAULT
    noise_v: float = 0.1          # fractional speed noise, std
    noise_omega: float = 0.2      # rad/s, additive heading-rate noise std
    bias_omega: float = 0.0       # per-robot constant drift, drawn at init
    bias_omega_std: float = 0.1   # std used for that draw

    def copy(self) -> "MotionModelParams":
        return MotionModelParams(
            self.model, self.v_max, self.omega_max, self.wheel_base,
            self.noise_v, self.noise_omega, self.bias_omega, self.bias_omega_std,
        )


def clamp_duty(value: float, lo: float, hi: float) -> float:
    return lo if value < lo else hi if value > hi else value


def unicycle_step(pose: Pose2D, v: float, omega: float, dt: float) -> Pose2D:
    """Advance along the exact circular arc for constant (v, omega)."""
    if v == 0.0 and omega == 0.0:
        return pose
    theta1 = pose.theta + omega * dt
    if abs(omega) < 1e-10:
        return Pose2D(
            pose.x + v * math.cos(pose.theta) * dt,
            pose.y + v * math.sin(pose.theta) * dt,
            theta1,
        )
    r = v / omega
    return Pose2D(
        pose.x + r * (math.sin(theta1) - math.sin(pose.theta)),
        pose.y - r * (math.cos(theta1) - math.cos(pose.theta)),
        theta1,
    )


def closed_form_arc(pose: Pose2D, v: float, omega: float, t: float) -> Pose2D:
    """Pose after driving the same arc for total time t; single evaluation."""
    return unicycle_step(pose, v, omega, t)


def diff_drive_rates(cmd: MotorCommand, params: MotionModelParams) -> tuple[float, float]:
    left = clamp_duty(cmd.left, -1.0, 1.0)
    right = clamp_duty(cmd.right, -1.0, 1.0)
    v = params.v_max * (left + right) / 2.0
    omega = params.v_max * (right - left) / params.wheel_base
    return v, omega


def diff_drive_step(
    pose: Pose2D, cmd: MotorCommand, params: MotionModelParams, dt: float
) -> Pose2D:
    v, omega = diff_drive_rates(cmd, params)
    return unicycle_step(pose, v, omega, dt)


def draw_vibration_noise(params: MotionModelParams, rng: RngStream) -> tuple[float, float]:
    """(eta_v, eta_omega) for one controller period, clipped at 5 sigma."""
    eta_v = rng.clipped_normal(params.noise_v)
    eta_omega = rng.clipped_normal(params.noise_omega)
    return eta_v, eta_omega


def vibration_rates(
    cmd: MotorCommand, params: MotionModelParams, noise: tuple[float, float]
) -> tuple[float, float]:
    left = clamp_duty(cmd.left, 0.0, 1.0)
    right = clamp_duty(cmd.right, 0.0, 1.0)
    if left == 0.0 and right == 0.0:
        # parked robots do not creep, whatever the noise and bias say
        return 0.0, 0.0
    eta_v, eta_omega = noise
    v = params.v_max * (left + right) / 2.0 * (1.0 + eta_v)
    omega = params.omega_max * (left - right) + params.bias_omega + eta_omega
    return v, omega


def vibration_step(
    pose: Pose2D, cmd: MotorCommand, params: MotionModelParams, dt: float, rng: RngStream
) -> Pose2D:
    """One step with freshly drawn noise; callers that hold noise across a
    controller period use vibration_rates/unicycle_step directly."""
    v, omega = vibration_rates(cmd, params, draw_vibration_noise(params, rng))
    return unicycle_step(pose, v, omega, dt)


def step_displacement_bound(params: MotionModelParams, dt: float) -> float:
    """Upper bound on per-step travel with clipped noise."""
    return params.v_max * (1.0 + 5.0 * params.noise_v) * dt


def heading_change(before: Pose2D, after: Pose2D) -> float:
    return normalize_angle(after.theta - before.theta)
