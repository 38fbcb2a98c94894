"""Workspace geometry: obstacles, environments, and closest-obstacle queries.

The controller is only allowed three geometric primitives: distance to the
nearest obstacle boundary, the closest boundary point, and the bearing
toward it. Everything here is a pure function of its inputs; environments
are immutable after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TAU = 2.0 * math.pi


def wrap_angle(angle: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    wrapped = math.remainder(angle, TAU)
    return math.pi if wrapped == -math.pi else wrapped


class PenetrationError(RuntimeError):
    """Robot position is inside an obstacle.

    This signals a safety violation and is never silently clamped. Carries
    the offending obstacle index and the penetration depth in meters.
    """

    def __init__(self, obstacle_index: int, depth: float):
        self.obstacle_index = obstacle_index
        self.depth = depth
        super().__init__(
            f"position penetrates obstacle {obstacle_index} by {depth:.6g} m"
        )


@dataclass(frozen=True)
class ConstantVelocity:
    """Rigid translation at constant velocity [m/s]."""

    velocity: tuple[float, float]

    def offset(self, time: float) -> tuple[float, float]:
        return (self.velocity[0] * time, self.velocity[1] * time)


@dataclass(frozen=True)
class WaypointLoop:
    """Closed piecewise-linear path traversed at constant speed.

    Waypoints are displacements in the obstacle's local frame; the path
    cycles back to the first waypoint. ``phase`` is an arc-length offset
    [m] selecting where on the loop the obstacle sits at t = 0. The
    obstacle's translation is path(phase + speed*t) - path(phase), so the
    declared geometry is its pose at t = 0.
    """

    waypoints: tuple[tuple[float, float], ...]
    speed: float
    phase: float = 0.0

    def __post_init__(self):
        if len(self.waypoints) < 2:
            raise ValueError("waypoint loop needs at least two waypoints")
        if self.speed <= 0.0:
            raise ValueError("waypoint loop speed must be positive")
        for a, b in self._legs():
            if a == b:
                raise ValueError("consecutive waypoints must be distinct")

    def _legs(self):
        pts = self.waypoints
        return [(pts[i], pts[(i + 1) % len(pts)]) for i in range(len(pts))]

    def _point_at(self, arc: float) -> tuple[float, float]:
        legs = self._legs()
        lengths = [math.hypot(b[0] - a[0], b[1] - a[1]) for a, b in legs]
        total = sum(lengths)
        s = arc % total
        for (a, b), length in zip(legs, lengths):
            if s <= length:
                t = s / length
                return (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))
            s -= length
        return legs[-1][1]

    def offset(self, time: float) -> tuple[float, float]:
        x0, y0 = self._point_at(self.phase)
        x1, y1 = self._point_at(self.phase + self.speed * time)
        return (x1 - x0, y1 - y0)


Motion = ConstantVelocity | WaypointLoop


@dataclass(frozen=True)
class Circle:
    """Open disc obstacle."""

    center: tuple[float, float]
    radius: float
    motion: Motion | None = None

    def __post_init__(self):
        if self.radius <= 0.0:
            raise ValueError("circle radius must be positive")


@dataclass(frozen=True)
class Segment:
    """Thick segment (capsule) obstacle: all points within ``thickness`` of
    the centerline. thickness = 0 degenerates to a bare line segment."""

    endpoint_a: tuple[float, float]
    endpoint_b: tuple[float, float]
    thickness: float = 0.0
    motion: Motion | None = None

    def __post_init__(self):
        if self.thickness < 0.0:
            raise ValueError("segment thickness must be non-negative")
        if self.endpoint_a == self.endpoint_b:
            raise ValueError("segment endpoints must be distinct")


Obstacle = Circle | Segment


@dataclass(frozen=True)
class Environment:
    """Static description of the cluttered workspace.

    ``bounds`` is (xmin, xmax, ymin, ymax); it scopes random sampling and
    plotting but is not itself an obstacle. ``d_safe`` is the prescribed
    margin around every obstacle boundary and ``d_min`` the assumed minimum
    separation between obstacle boundaries. Pairwise clearance is checked
    by :func:`validate_environment`; scenario loading and environment
    generation refuse environments that fail it.
    """

    obstacles: tuple[Obstacle, ...]
    bounds: tuple[float, float, float, float]
    d_safe: float
    d_min: float

    def __post_init__(self):
        xmin, xmax, ymin, ymax = self.bounds
        if not (xmin < xmax and ymin < ymax):
            raise ValueError("bounds must satisfy xmin < xmax and ymin < ymax")
        if self.d_safe <= 0.0:
            raise ValueError("d_safe must be positive")
        if self.d_min <= 0.0:
            raise ValueError("d_min must be positive")
        if self.d_cons <= 0.0:
            raise ValueError(
                "d_min/2 - d_safe must be positive (plateau threshold d_cons)"
            )

    @property
    def d_cons(self) -> float:
        return 0.5 * self.d_min - self.d_safe


@dataclass(frozen=True)
class ClosestObstacleQuery:
    """Answer to a closest-obstacle query at one position and time.

    ``o_ro`` is the unit bearing vector pointing from the robot toward the
    closest boundary point and ``beta`` its angle in (-pi, pi].
    ``curvature`` is 1/distance to the closest feature's center (circle
    center or capsule endpoint) and 0 for flat capsule sides; it is the
    only second-order geometric quantity the barrier derivatives need.
    """

    distance_boundary: float
    d_ro: float
    closest_point: np.ndarray
    o_ro: np.ndarray
    beta: float
    obstacle_index: int
    curvature: float


def _shape_query(obstacle: Obstacle, px: float, py: float, time: float):
    """Distance to boundary, closest point, bearing, curvature for one shape.

    Returns (dist_boundary, cx, cy, bearing_x, bearing_y, curvature); the
    bearing points from the robot toward the obstacle and stays well defined
    as the boundary distance goes to zero.
    """
    ox, oy = obstacle.motion.offset(time) if obstacle.motion else (0.0, 0.0)
    if isinstance(obstacle, Circle):
        fx, fy = obstacle.center[0] + ox, obstacle.center[1] + oy
        reach = obstacle.radius
    else:
        ax, ay = obstacle.endpoint_a[0] + ox, obstacle.endpoint_a[1] + oy
        bx, by = obstacle.endpoint_b[0] + ox, obstacle.endpoint_b[1] + oy
        ux, uy = bx - ax, by - ay
        t = ((px - ax) * ux + (py - ay) * uy) / (ux * ux + uy * uy)
        flat = 0.0 < t < 1.0
        t = min(max(t, 0.0), 1.0)
        fx, fy = ax + t * ux, ay + t * uy
        reach = obstacle.thickness

    dx, dy = px - fx, py - fy
    rho = math.hypot(dx, dy)
    if rho < 1e-12:
        # At the feature center: deep inside (or on a bare segment).
        return (-reach, fx + reach, fy, 1.0, 0.0, math.inf)
    inv = 1.0 / rho
    nx, ny = -dx * inv, -dy * inv
    cx, cy = fx + reach * dx * inv, fy + reach * dy * inv
    if isinstance(obstacle, Segment) and flat:
        curvature = 0.0
    else:
        curvature = inv
    return (rho - reach, cx, cy, nx, ny, curvature)


def closest_obstacle(
    position, env: Environment, time: float = 0.0
) -> ClosestObstacleQuery:
    """Find the nearest obstacle boundary at the given time.

    Moving obstacles are evaluated at their pose at ``time``; static ones
    ignore it. Ties are broken toward the lowest obstacle index.

    Raises:
        PenetrationError: position lies strictly inside an obstacle.
        ValueError: the environment has no obstacles.
    """
    if not env.obstacles:
        raise ValueError("closest_obstacle requires at least one obstacle")
    px, py = float(position[0]), float(position[1])
    best = None
    best_index = -1
    for index, obstacle in enumerate(env.obstacles):
        result = _shape_query(obstacle, px, py, time)
        if result[0] < 0.0:
            raise PenetrationError(index, -result[0])
        if best is None or result[0] < best[0]:
            best = result
            best_index = index
    dist, cx, cy, nx, ny, curvature = best
    beta = math.atan2(ny, nx)
    if beta == -math.pi:
        beta = math.pi
    return ClosestObstacleQuery(
        distance_boundary=dist,
        d_ro=dist - env.d_safe,
        closest_point=np.array([cx, cy]),
        o_ro=np.array([nx, ny]),
        beta=beta,
        obstacle_index=best_index,
        curvature=curvature,
    )


@dataclass(frozen=True)
class SensorReading:
    """Everything the controller may legally see at one instant.

    ``obstacle`` is None when nothing lies within sensor range (the barrier
    then sits on its plateau and the safety filter stays inactive); the
    field value and exact local gradient are always available.
    """

    obstacle: ClosestObstacleQuery | None
    value: float
    gradient: np.ndarray


def sensor_read(
    position, env: Environment, field, time: float = 0.0,
    max_range: float = math.inf,
) -> SensorReading:
    """Bundle the closest-obstacle query with the local field gradient.

    Obstacles farther than ``max_range`` (boundary distance) are not
    reported. Propagates PenetrationError from the geometric query.
    """
    value, gradient = field.evaluate(position)
    if not env.obstacles:
        return SensorReading(None, value, gradient)
    query = closest_obstacle(position, env, time)
    if query.distance_boundary > max_range:
        return SensorReading(None, value, gradient)
    return SensorReading(query, value, gradient)


@dataclass(frozen=True)
class ClearanceViolation:
    """A pair of obstacles closer than the declared minimum separation."""

    index_a: int
    index_b: int
    clearance: float

    def __str__(self):
        return (
            f"obstacles {self.index_a} and {self.index_b}: boundary "
            f"clearance {self.clearance:.6g} m below d_min"
        )


def _segment_point_distance(ax, ay, bx, by, px, py) -> float:
    ux, uy = bx - ax, by - ay
    t = ((px - ax) * ux + (py - ay) * uy) / (ux * ux + uy * uy)
    t = min(max(t, 0.0), 1.0)
    return math.hypot(px - (ax + t * ux), py - (ay + t * uy))


def _segments_intersect(p1, p2, p3, p4) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(p3, p4, p1), orient(p3, p4, p2)
    d3, d4 = orient(p1, p2, p3), orient(p1, p2, p4)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def _pair_clearance(a: Obstacle, b: Obstacle) -> float:
    """Boundary-to-boundary distance between two obstacles at t = 0."""
    if isinstance(a, Segment) and isinstance(b, Circle):
        a, b = b, a
    if isinstance(a, Circle) and isinstance(b, Circle):
        gap = math.hypot(
            a.center[0] - b.center[0], a.center[1] - b.center[1]
        )
        return gap - a.radius - b.radius
    if isinstance(a, Circle) and isinstance(b, Segment):
        gap = _segment_point_distance(
            b.endpoint_a[0], b.endpoint_a[1], b.endpoint_b[0], b.endpoint_b[1],
            a.center[0], a.center[1],
        )
        return gap - a.radius - b.thickness
    # segment-segment
    if _segments_intersect(a.endpoint_a, a.endpoint_b, b.endpoint_a, b.endpoint_b):
        gap = 0.0
    else:
        gap = min(
            _segment_point_distance(*a.endpoint_a, *a.endpoint_b, *b.endpoint_a),
            _segment_point_distance(*a.endpoint_a, *a.endpoint_b, *b.endpoint_b),
            _segment_point_distance(*b.endpoint_a, *b.endpoint_b, *a.endpoint_a),
            _segment_point_distance(*b.endpoint_a, *b.endpoint_b, *a.endpoint_b),
        )
    return gap - a.thickness - b.thickness


def validate_environment(env: Environment) -> list[ClearanceViolation]:
    """Check pairwise obstacle clearances against d_min (poses at t = 0).

    Diagnostic only: returns one violation per offending pair, empty when
    the environment satisfies the minimum-separation assumption.
    """
    violations = []
    for i in range(len(env.obstacles)):
        for j in range(i + 1, len(env.obstacles)):
            clearance = _pair_clearance(env.obstacles[i], env.obstacles[j])
            if clearance < env.d_min:
                violations.append(ClearanceViolation(i, j, clearance))
    return violations
