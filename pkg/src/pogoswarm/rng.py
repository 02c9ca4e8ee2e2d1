"""Counter-based random streams.

Every consumer in the simulator owns a stream derived from
(master_seed, entity_id, stream_id) through a 64-bit avalanche mix, so a
given triple yields the same draw sequence regardless of what any other
stream consumed. Draws are pure integer arithmetic; floating-point
conversion happens only at the edge.
"""
from __future__ import annotations

import math
from enum import IntEnum

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_STREAM_SALT = 0xC2B2AE3D27D4EB4F


class StreamId(IntEnum):
    MOTION_NOISE = 0
    SENSOR_NOISE = 1
    CHANNEL = 2
    CONTROLLER = 3
    INIT = 4


def mix64(x: int) -> int:
    """Avalanche finalizer; full 64-bit diffusion of the input."""
    x &= _MASK
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK
    x ^= x >> 31
    return x


def stream_key(master_seed: int, entity_id: int, stream_id: int) -> int:
    k = mix64(master_seed & _MASK)
    k = mix64(k ^ ((entity_id * _GOLDEN) & _MASK))
    k = mix64(k ^ ((stream_id * _STREAM_SALT) & _MASK))
    return k


class RngStream:
    """Deterministic draw sequence for one (seed, entity, stream) triple."""

    __slots__ = ("_state",)

    def __init__(self, master_seed: int, entity_id: int, stream_id: int):
        self._state = stream_key(master_seed, entity_id, stream_id)

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK
        return mix64(self._state)

    def uniform(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) / 9007199254740992.0

    def normal(self, std: float = 1.0) -> float:
        """One Gaussian draw (Box-Muller, no cached spare)."""
        u1 = ((self.next_u64() >> 11) + 1) / 9007199254740992.0  # (0, 1]
        u2 = (self.next_u64() >> 11) / 9007199254740992.0
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2) * std

    def clipped_normal(self, std: float, clip_sigma: float = 5.0) -> float:
        z = self.normal(1.0)
        if z > clip_sigma:
            z = clip_sigma
        elif z < -clip_sigma:
            z = -clip_sigma
        return z * std

    def uniform_range(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.uniform()

    def exponential(self, mean: float) -> float:
        u = self.uniform()
        return -mean * math.log(1.0 - u)
