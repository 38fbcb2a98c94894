"""Gradient-ascent source-seeking reference controller.

Generates the longitudinal/angular velocity pair

    v_s     =  k1 * <o(theta), grad J>
    omega_s = -k2 * <o(theta), perp(grad J)>

with o(theta) = (cos theta, sin theta), and lifts v_s to a reference
acceleration by backward differencing at the control rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class SeekGains:
    """Positive gains of the reference law.

    ``normalize_perp`` switches the angular term to the normalized rotated
    gradient; default is the raw rotation, which keeps the two inner
    products dimensionally matched.
    """

    k1: float
    k2: float
    normalize_perp: bool = False

    def __post_init__(self):
        if self.k1 <= 0.0 or self.k2 <= 0.0:
            raise ValueError("seek gains k1, k2 must be positive")


def seek_reference(theta: float, gradient, gains: SeekGains) -> tuple[float, float]:
    """Reference (v_s, omega_s) for a heading and local gradient."""
    ox, oy = math.cos(theta), math.sin(theta)
    gx, gy = float(gradient[0]), float(gradient[1])
    px, py = -gy, gx
    if gains.normalize_perp:
        norm = math.hypot(px, py)
        if norm > 0.0:
            px, py = px / norm, py / norm
    v_s = gains.k1 * (ox * gx + oy * gy)
    omega_s = -gains.k2 * (ox * px + oy * py)
    return v_s, omega_s


class ReferenceDifferentiator:
    """Backward-difference acceleration of the sampled v_s stream.

    Holds the previous (time, v_s) sample; one instance per simulated
    robot. The first call returns 0 since no history exists.
    """

    def __init__(self):
        self._previous: tuple[float, float] | None = None

    def update(self, time: float, v_s: float) -> float:
        if self._previous is None:
            accel = 0.0
        else:
            prev_time, prev_v = self._previous
            if time <= prev_time:
                raise ValueError("reference samples must have increasing timestamps")
            accel = (v_s - prev_v) / (time - prev_time)
        self._previous = (time, v_s)
        return accel

    def reset(self):
        self._previous = None
