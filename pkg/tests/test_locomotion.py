from __future__ import annotations

import math

from hypothesis import given, settings, strategies as st

from pogoswarm.geometry import Pose2D, normalize_angle
from pogoswarm.locomotion import (
    MotionModelParams,
    MotorCommand,
    diff_drive_rates,
    diff_drive_step,
    draw_vibration_noise,
    step_displacement_bound,
    unicycle_step,
    vibration_rates,
    vibration_step,
)
from pogoswarm.rng import RngStream

DT = 0.001


def _closed_form(pose: Pose2D, v: float, omega: float, t: float) -> Pose2D:
    """Independent single-shot arc solution used as the oracle."""
    theta1 = pose.theta + omega * t
    if omega == 0.0:
        return Pose2D(pose.x + v * t * math.cos(pose.theta),
                      pose.y + v * t * math.sin(pose.theta), theta1)
    r = v / omega
    return Pose2D(pose.x + r * (math.sin(theta1) - math.sin(pose.theta)),
                  pose.y - r * (math.cos(theta1) - math.cos(pose.theta)), theta1)


def test_straight_line():
    params = MotionModelParams(model="differential")
    pose = Pose2D(0.0, 0.0, 0.0)
    for _ in range(1000):
        pose = diff_drive_step(pose, MotorCommand(1.0, 1.0), params, DT)
    assert abs(pose.x - 0.06) < 1e-9
    assert pose.y == 0.0 and pose.theta == 0.0


def test_curved_arc_radius():
    params = MotionModelParams(model="differential")
    v, omega = diff_drive_rates(MotorCommand(1.0, 0.5), params)
    assert abs(v / omega - (-0.075)) < 1e-12  # signed turn radius


def test_iterated_steps_match_closed_form():
    params = MotionModelParams(model="differential")
    cmd = MotorCommand(1.0, 0.5)
    v, omega = diff_drive_rates(cmd, params)
    pose = Pose2D(0.2, -0.1, 0.7)
    n = 10000
    for _ in range(n):
        pose = diff_drive_step(pose, cmd, params, DT)
    want = _closed_form(Pose2D(0.2, -0.1, 0.7), v, omega, n * DT)
    assert math.hypot(pose.x - want.x, pose.y - want.y) < 1e-6
    assert abs(normalize_angle(pose.theta - want.theta)) < 1e-9


@given(
    st.floats(-1, 1), st.floats(-1, 1),
    st.floats(-math.pi, math.pi), st.integers(1, 200),
)
@settings(max_examples=60, deadline=None)
def test_arc_stays_on_circle(left, right, theta0, n):
    params = MotionModelParams(model="differential")
    cmd = MotorCommand(left, right)
    v, omega = diff_drive_rates(cmd, params)
    if abs(omega) < 1e-6:
        return
    pose = Pose2D(0.0, 0.0, theta0)
    r = v / omega
    cx = pose.x - r * math.sin(pose.theta)
    cy = pose.y + r * math.cos(pose.theta)
    for _ in range(n):
        pose = unicycle_step(pose, v, omega, DT)
        assert abs(math.hypot(pose.x - cx, pose.y - cy) - abs(r)) < 1e-9


def test_zero_duty_never_moves():
    params = MotionModelParams(model="vibration", noise_v=0.5, noise_omega=1.0,
                               bias_omega=0.4)
    rng = RngStream(3, 0, 0)
    pose = Pose2D(0.1, 0.2, 0.3)
    for _ in range(500):
        pose = vibration_step(pose, MotorCommand(0.0, 0.0), params, DT, rng)
    assert (pose.x, pose.y, pose.theta) == (0.1, 0.2, 0.3)


def test_noiseless_vibration_equals_differential_straight():
    vib = MotionModelParams(model="vibration", noise_v=0.0, noise_omega=0.0,
                            bias_omega=0.0)
    dif = MotionModelParams(model="differential")
    rng = RngStream(0, 0, 0)
    a = Pose2D(0.0, 0.0, 1.1)
    b = Pose2D(0.0, 0.0, 1.1)
    for _ in range(300):
        a = vibration_step(a, MotorCommand(1.0, 1.0), vib, DT, rng)
        b = diff_drive_step(b, MotorCommand(1.0, 1.0), dif, DT)
    assert a == b


def test_vibration_duty_clamped_to_unit_interval():
    params = MotionModelParams(model="vibration")
    v_neg, w_neg = vibration_rates(MotorCommand(-0.5, -0.5), params, (0.0, 0.0))
    assert (v_neg, w_neg) == (0.0, 0.0)
    v_hi, _ = vibration_rates(MotorCommand(1.5, 1.5), params, (0.0, 0.0))
    assert abs(v_hi - params.v_max) < 1e-12


def test_speed_bound_with_noise():
    params = MotionModelParams(model="vibration", noise_v=0.1, noise_omega=0.2)
    rng = RngStream(17, 5, 0)
    pose = Pose2D(0.0, 0.0, 0.0)
    bound = step_displacement_bound(params, DT)
    for _ in range(5000):
        nxt = vibration_step(pose, MotorCommand(1.0, 1.0), params, DT, rng)
        assert math.hypot(nxt.x - pose.x, nxt.y - pose.y) <= bound + 1e-15
        pose = nxt


@given(st.floats(-math.pi, math.pi))
@settings(max_examples=30, deadline=None)
def test_rotation_equivariance(phi):
    params = MotionModelParams(model="vibration", noise_v=0.1, noise_omega=0.2)
    cmd = MotorCommand(0.9, 0.4)
    a = Pose2D(0.0, 0.0, 0.2)
    b = Pose2D(0.0, 0.0, normalize_angle(0.2 + phi))
    rng_a = RngStream(8, 1, 0)
    rng_b = RngStream(8, 1, 0)
    for _ in range(50):
        a = vibration_step(a, cmd, params, DT, rng_a)
        b = vibration_step(b, cmd, params, DT, rng_b)
    # same noise draws: trajectory b is trajectory a rotated by phi
    ra_x = a.x * math.cos(phi) - a.y * math.sin(phi)
    ra_y = a.x * math.sin(phi) + a.y * math.cos(phi)
    assert math.hypot(ra_x - b.x, ra_y - b.y) < 1e-9
    assert abs(normalize_angle(b.theta - a.theta - phi)) < 1e-9


def test_heading_diffusion_variance_grows_linearly():
    # small-scale version of the acceptance fit: variance of unwrapped heading
    # across runs should grow like sigma^2 * t
    params = MotionModelParams(model="vibration", noise_v=0.0, noise_omega=0.3,
                               bias_omega=0.0)
    period = 0.1
    runs = 2000
    steps = 40
    totals = [[0.0] * runs for _ in range(steps)]
    for r in range(runs):
        rng = RngStream(100, r, 0)
        heading = 0.0
        for s in range(steps):
            noise = draw_vibration_noise(params, rng)
            _, omega = vibration_rates(MotorCommand(1.0, 1.0), params, noise)
            heading += omega * period
            totals[s][r] = heading
    variances = []
    for s in range(steps):
        m = sum(totals[s]) / runs
        variances.append(sum((h - m) ** 2 for h in totals[s]) / runs)
    expected_slope = (0.3 * period) ** 2  # per step
    slope = (variances[-1] - variances[0]) / (steps - 1)
    assert abs(slope - expected_slope) / expected_slope < 0.15
