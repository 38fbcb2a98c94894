"""Concave source fields with exact gradients.

The quadratic family J(p) = -(p - p*)^T M (p - p*) with symmetric positive
definite M is strictly concave, radially unbounded, and has its unique
global maximum at the source p*; its gradient -2 M (p - p*) vanishes only
there. Custom fields wrap an arbitrary (value, gradient) evaluator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


def perp_ccw(vector) -> np.ndarray:
    """Counter-clockwise perpendicular: (gx, gy) -> (-gy, gx).

    Fixed sign convention for the rotated gradient used by the angular
    reference law; the opposite rotation merely flips turning direction.
    """
    return np.array([-float(vector[1]), float(vector[0])])


@dataclass(frozen=True)
class QuadraticField:
    """J(p) = -(p - source)^T M (p - source) with M symmetric positive definite."""

    matrix: tuple[tuple[float, float], tuple[float, float]]
    source: tuple[float, float]

    def __post_init__(self):
        (a, b), (c, d) = self.matrix
        if abs(b - c) > 1e-12:
            raise ValueError("field matrix must be symmetric")
        if a <= 0.0 or a * d - b * c <= 0.0:
            raise ValueError("field matrix must be positive definite")

    def evaluate(self, position) -> tuple[float, np.ndarray]:
        """Return (J(p), grad J(p)); the gradient is exact."""
        (a, b), (_, d) = self.matrix
        dx = float(position[0]) - self.source[0]
        dy = float(position[1]) - self.source[1]
        value = -(a * dx * dx + 2.0 * b * dx * dy + d * dy * dy)
        gradient = np.array(
            [-2.0 * (a * dx + b * dy), -2.0 * (b * dx + d * dy)]
        )
        return value, gradient


@dataclass(frozen=True)
class CustomField:
    """Field defined by a user evaluator returning (value, gradient)."""

    evaluator: Callable[[np.ndarray], tuple[float, np.ndarray]]

    def evaluate(self, position) -> tuple[float, np.ndarray]:
        value, gradient = self.evaluator(np.asarray(position, dtype=float))
        return float(value), np.asarray(gradient, dtype=float)


SourceField = QuadraticField | CustomField


def gradient_fd_check(field: SourceField, position, step: float) -> float:
    """Max per-component |analytic - central difference| of the gradient."""
    if step <= 0.0:
        raise ValueError("finite-difference step must be positive")
    position = np.asarray(position, dtype=float)
    _, analytic = field.evaluate(position)
    worst = 0.0
    for axis in range(2):
        offset = np.zeros(2)
        offset[axis] = step
        hi, _ = field.evaluate(position + offset)
        lo, _ = field.evaluate(position - offset)
        worst = max(worst, abs((hi - lo) / (2.0 * step) - analytic[axis]))
    return worst
