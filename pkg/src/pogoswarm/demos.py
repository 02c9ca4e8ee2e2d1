"""Built-in controller programs.

These double as living documentation of the API. The senders deliberately
randomize their talk schedule: every robot's controller runs on the same
global tick, so two neighbors that always transmit together would jam each
other forever under the destructive collision policy.
"""
from __future__ import annotations

import math

from .firmware import register_program
from .irnet import ALL_FACES_MASK, MsgType

HOP_SENTINEL = 255

PALETTE = (
    (230, 25, 75), (60, 180, 75), (255, 225, 25), (0, 130, 200),
    (245, 130, 48), (145, 30, 180), (70, 240, 240), (240, 50, 230),
)


@register_program("idle")
class Idle:
    """Does nothing at all; useful as a placeholder and a determinism anchor."""

    def setup(self, api, params):
        return {}

    def step(self, api, state):
        pass


@register_program("signal_led")
class SignalLed:
    """Idle body, but paints the head LED with the last signal code received."""

    def setup(self, api, params):
        return {"code": None}

    def step(self, api, state):
        pass

    def on_signal(self, api, state, signal):
        state["code"] = signal.code
        api.set_head_led(*PALETTE[signal.code % len(PALETTE)])


@register_program("hop_gradient")
class HopGradient:
    """Min-relaxation gradient from a seed robot.

    Each controller tick the robot drains its inbox, keeps the smallest
    neighbor hop + 1, and re-advertises its own hop. Advertisement starts
    at full rate, one frame per controller tick, so short chains settle in
    as many periods as they have links; after the opening window the duty
    drops to a randomized probability redrawn from a wide log-uniform
    range, which keeps collision losses finite when several neighbors
    share one receiving face and would otherwise jam it forever.
    """

    SEND_P_LO = 0.005
    SEND_P_HI = 0.25
    EAGER_MS = 200    # full-rate window: ~6 controller periods
    REFRESH_MS = 528  # 16 controller periods at the default rate

    def setup(self, api, params):
        seed = bool(params.get("seed"))
        state = {
            "seed": seed,
            "hop": 0 if seed else HOP_SENTINEL,
            "p": 1.0,
            "refresh_at": self.EAGER_MS,
        }
        return state

    def step(self, api, state):
        hop = state["hop"]
        msg = api.recv()
        while msg is not None:
            if msg.msg_type == MsgType.USER and len(msg.payload) == 1:
                neighbor = msg.payload[0]
                if neighbor < HOP_SENTINEL and neighbor + 1 < hop:
                    hop = neighbor + 1
            msg = api.recv()
        if state["seed"]:
            hop = 0
        state["hop"] = hop

        ms = api.millis()
        if ms >= state["refresh_at"]:
            # log-uniform: dense neighborhoods need the quiet end of the range
            span = math.log(self.SEND_P_HI / self.SEND_P_LO)
            state["p"] = self.SEND_P_LO * math.exp(api.random() * span)
            state["refresh_at"] = ms + self.REFRESH_MS
        if api.random() < state["p"]:
            api.send(bytes((hop,)), ALL_FACES_MASK)

        api.set_head_led(*PALETTE[hop % len(PALETTE)])


@register_program("phototaxis")
class Phototaxis:
    """Steer toward the brighter front sensor; stop once both saturate."""

    DEADBAND_FLOOR = 4  # ADC counts

    def setup(self, api, params):
        return {}

    def step(self, api, state):
        fl, fr, back = api.photosensors()
        if fl >= 65534 and fr >= 65534:
            api.set_motors(0.0, 0.0)
            return
        if back > fl and back > fr:
            # source behind: rotate in place until a front sensor wins
            api.set_motors(-0.6, 0.6)
            return
        diff = fl - fr
        deadband = max(self.DEADBAND_FLOOR, (fl + fr) // 50)
        if diff > deadband:
            api.set_motors(0.2, 1.0)
        elif diff < -deadband:
            api.set_motors(1.0, 0.2)
        else:
            api.set_motors(1.0, 1.0)


@register_program("run_tumble")
class RunTumble:
    """Straight runs with exponentially distributed length, then a uniform
    random reorientation. Sends nothing, ever."""

    RUN_MEAN_S = 5.0

    def setup(self, api, params):
        return {
            "mode": "run",
            "deadline": api.millis() + 1000.0 * api.random_exponential(self.RUN_MEAN_S),
        }

    def step(self, api, state):
        ms = api.millis()
        if state["mode"] == "run":
            api.set_motors(1.0, 1.0)
            if ms >= state["deadline"]:
                angle = api.random_range(-math.pi, math.pi)
                _, omega_max = api.motion_limits()
                state["mode"] = "turn"
                state["left"] = angle > 0.0
                state["deadline"] = ms + 1000.0 * abs(angle) / omega_max
        else:
            if state["left"]:
                api.set_motors(1.0, 0.0)
            else:
                api.set_motors(0.0, 1.0)
            if ms >= state["deadline"]:
                state["mode"] = "run"
                state["deadline"] = ms + 1000.0 * api.random_exponential(self.RUN_MEAN_S)


@register_program("flood")
class Flood:
    """Saturating test sender: one frame per controller tick with probability p."""

    def setup(self, api, params):
        return {"p": float(params.get("p", 0.5))}

    def step(self, api, state):
        if api.random() < state["p"]:
            api.send(b"\x00\x01\x02\x03", ALL_FACES_MASK)


@register_program("forward")
class Forward:
    """Full speed ahead; the battering ram used by the pushing tests."""

    def setup(self, api, params):
        return {}

    def step(self, api, state):
        api.set_motors(1.0, 1.0)
