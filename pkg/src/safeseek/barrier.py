"""Control barrier functions for the unicycle in a cluttered workspace.

Zeroing barrier on the extended state xi = (x, y, v, xdot, ydot):

    h(xi) = D(d_ro) * exp(-P),   P = <o_r, o_ro> + v * delta

where D vanishes at the safety margin, is negative inside it, and (for the
smooth bump variant) plateaus at c = exp(-1/(gamma*d_cons)) beyond d_cons.
The directional offset delta > 0 keeps ||L_g h|| nonzero on the interior,
giving uniform relative degree one in both the acceleration and the
angular-velocity channel.

Reciprocal barrier on the plain unicycle pose, with the angular velocity as
the only constrained input:

    B = 1 / (D * exp(P)),        P = wrap(theta - beta) * delta.

All derivatives are exact. The closest boundary point enters through the
query's bearing and curvature; for moving obstacles the closest point is
treated as instantaneously fixed (quasi-static barrier).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .geometry import ClosestObstacleQuery, wrap_angle

#: ||L_g h||^2 below this is treated as zero by the safety filter.
LGH_EPS_SQ = 1e-12


@dataclass(frozen=True)
class ExtendedState:
    """Unicycle state extended with the longitudinal speed.

    The extended coordinates are (x, y, v, xdot, ydot) with
    xdot = v cos(theta), ydot = v sin(theta); the heading is stored
    explicitly and the velocity components are derived from it, which is
    algebraically identical on that manifold and avoids dividing by v.
    The state space restricts v to positive values.
    """

    x: float
    y: float
    theta: float
    v: float

    def __post_init__(self):
        if not self.v > 0.0:
            raise ValueError("extended state requires positive longitudinal speed")

    @property
    def xdot(self) -> float:
        return self.v * math.cos(self.theta)

    @property
    def ydot(self) -> float:
        return self.v * math.sin(self.theta)

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @classmethod
    def from_flat(cls, x: float, y: float, v: float, xdot: float, ydot: float,
                  tol: float = 1e-9) -> "ExtendedState":
        """Build from the raw 5-tuple, checking ||(xdot, ydot)|| = v."""
        speed = math.hypot(xdot, ydot)
        if abs(speed - v) > tol:
            raise ValueError(
                f"inconsistent extended state: |(xdot, ydot)| = {speed!r} != v = {v!r}"
            )
        return cls(x=x, y=y, theta=math.atan2(ydot, xdot), v=v)


@dataclass(frozen=True)
class SmoothBumpD:
    """Smooth distance shaping: 0 at the margin, c on the plateau.

        D(d_ro) = c - exp(1/(gamma*(d_ro - d_cons)))   for d_ro < d_cons
                = c                                     otherwise
        c = exp(-1/(gamma*d_cons))
    """

    gamma: float
    d_cons: float

    def __post_init__(self):
        if self.gamma <= 0.0:
            raise ValueError("gamma must be positive")
        if self.d_cons <= 0.0:
            raise ValueError("d_cons must be positive")

    @property
    def plateau(self) -> float:
        return math.exp(-1.0 / (self.gamma * self.d_cons))

    def evaluate(self, d_ro: float) -> tuple[float, float]:
        """Return (D, dD/d d_ro); the derivative vanishes on the plateau."""
        if d_ro >= self.d_cons:
            return self.plateau, 0.0
        arg = self.gamma * (d_ro - self.d_cons)
        bump = math.exp(1.0 / arg)
        return self.plateau - bump, bump * self.gamma / (arg * arg)


@dataclass(frozen=True)
class PlainDistanceD:
    """Standard distance function D = d_ro (no plateau)."""

    def evaluate(self, d_ro: float) -> tuple[float, float]:
        return d_ro, 1.0


DFunction = SmoothBumpD | PlainDistanceD


@dataclass(frozen=True)
class BarrierEval:
    """Barrier value and derivatives produced once per control step.

    ``Lgh`` holds the sensitivities to (a, omega). ``H`` is the constraint
    value at the reference input, H = Lfh + Lgh . u_ref + kappa * h; the
    filter is active exactly when H < 0 with nonvanishing ||Lgh||. H and
    ``active`` are filled in by :func:`with_reference`.
    """

    h: float
    Lfh: float
    Lgh: np.ndarray
    p_o: float
    p_o_perp: float
    H: float = math.nan
    active: bool = False


def _projections(theta: float, query: ClosestObstacleQuery) -> tuple[float, float]:
    orx, ory = math.cos(theta), math.sin(theta)
    brx, bry = float(query.o_ro[0]), float(query.o_ro[1])
    p_o = orx * brx + ory * bry
    p_o_perp = -orx * bry + ory * brx
    return p_o, p_o_perp


def eval_zcbf(state: ExtendedState, query: ClosestObstacleQuery, delta: float,
              d_fn: DFunction) -> tuple[float, float, float]:
    """Evaluate h = D * exp(-(p_o + v*delta)); returns (h, p_o, p_o_perp)."""
    p_o, p_o_perp = _projections(state.theta, query)
    d_value, _ = d_fn.evaluate(query.d_ro)
    h = d_value * math.exp(-(p_o + state.v * delta))
    return h, p_o, p_o_perp


def lie_derivatives(state: ExtendedState, query: ClosestObstacleQuery,
                    delta: float, d_fn: DFunction) -> BarrierEval:
    """Exact L_f h and L_g h of the zeroing barrier at one state.

    With the extended drift f = (xdot, ydot, 0, 0, 0) and input columns
    g_a = (0, 0, 1, cos, sin), g_w = (0, 0, 0, -ydot, xdot):

        L_g h = [-D*delta*e^{-P},  D*p_o_perp*e^{-P}]
        L_f h = v*e^{-P} * (D*(1 - p_o^2)*curv - D'*p_o)

    where curv is the query's feature curvature (zero along flat capsule
    sides, where the bearing is constant under translation).
    """
    p_o, p_o_perp = _projections(state.theta, query)
    d_value, d_slope = d_fn.evaluate(query.d_ro)
    decay = math.exp(-(p_o + state.v * delta))
    h = d_value * decay
    lgh = np.array([-d_value * delta * decay, d_value * p_o_perp * decay])
    lfh = state.v * decay * (
        d_value * (1.0 - p_o * p_o) * query.curvature - d_slope * p_o
    )
    return BarrierEval(h=h, Lfh=lfh, Lgh=lgh, p_o=p_o, p_o_perp=p_o_perp)


def with_reference(ev: BarrierEval, u_ref, kappa: float) -> BarrierEval:
    """Assemble H = Lfh + Lgh . u_ref + kappa * h and the active flag."""
    a_ref, w_ref = float(u_ref[0]), float(u_ref[1])
    big_h = ev.Lfh + ev.Lgh[0] * a_ref + ev.Lgh[1] * w_ref + kappa * ev.h
    norm_sq = float(ev.Lgh[0] ** 2 + ev.Lgh[1] ** 2)
    return replace(ev, H=big_h, active=(big_h < 0.0 and norm_sq >= LGH_EPS_SQ))


def zcbf_value_raw(x: float, y: float, v: float, xdot: float, ydot: float,
                   query: ClosestObstacleQuery, delta: float,
                   d_fn: DFunction) -> float:
    """h from the raw extended coordinates, o_r = (xdot/v, ydot/v).

    Independent evaluation path used by the finite-difference checks; off
    the manifold ||(xdot, ydot)|| = v it honors the raw coordinates rather
    than the stored heading.
    """
    brx, bry = float(query.o_ro[0]), float(query.o_ro[1])
    p = (xdot * brx + ydot * bry) / v + v * delta
    d_value, _ = d_fn.evaluate(query.d_ro)
    return d_value * math.exp(-p)


class BarrierDomainError(RuntimeError):
    """Reciprocal barrier evaluated where D <= 0 (outside its domain)."""


@dataclass(frozen=True)
class RcbfEval:
    """Reciprocal barrier value and derivatives; h = 1/B = D * exp(P)."""

    B: float
    LfB: float
    LgB: float
    h: float


def eval_rcbf(x: float, y: float, theta: float, v: float,
              query: ClosestObstacleQuery, delta: float,
              d_fn: DFunction) -> RcbfEval:
    """Evaluate B = 1/(D e^P) with P = wrap(theta - beta) * delta.

    The drift is the time-varying unicycle flow (v cos, v sin, 0) and the
    input enters only through thetadot, so:

        L_g B = dB/dtheta = -delta * B
        L_f B = B * v * (D'*p_o/D - delta*p_o_perp*curv)

    Raises BarrierDomainError when D <= 0; the reciprocal form is defined
    only on the interior of the safe set.
    """
    d_value, d_slope = d_fn.evaluate(query.d_ro)
    if d_value <= 0.0:
        raise BarrierDomainError(
            f"reciprocal barrier undefined: D = {d_value!r} <= 0"
        )
    p = wrap_angle(theta - query.beta) * delta
    b_value = 1.0 / (d_value * math.exp(p))
    p_o, p_o_perp = _projections(theta, query)
    lfb = b_value * v * (
        d_slope * p_o / d_value - delta * p_o_perp * query.curvature
    )
    return RcbfEval(B=b_value, LfB=lfb, LgB=-delta * b_value,
                    h=d_value * math.exp(p))


def rcbf_value_raw(x: float, y: float, theta: float,
                   query: ClosestObstacleQuery, delta: float,
                   d_fn: DFunction) -> float:
    """B from raw pose coordinates, for finite-difference checks."""
    d_value, _ = d_fn.evaluate(query.d_ro)
    if d_value <= 0.0:
        raise BarrierDomainError("reciprocal barrier undefined: D <= 0")
    return 1.0 / (d_value * math.exp(wrap_angle(theta - query.beta) * delta))
