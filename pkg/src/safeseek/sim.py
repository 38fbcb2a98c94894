"""Discrete-time closed-loop simulator.

Each step runs sense -> reference -> barrier -> QP -> integrate at a fixed
rate (zero-order hold over dt, explicit Euler on the pre-update state):

    x+ = x + dt * v * cos(theta)        (current v and theta)
    theta+ = theta + dt * omega_cmd
    v+ = v + dt * a_cmd                 on steps where the filter intervenes

On steps where the filter does not intervene the longitudinal speed tracks
the source-seeking reference directly (v+ = v_s), which keeps the nominal
closed loop exactly equal to the gradient-ascent law the convergence
analysis is built on; integrating the reference acceleration open-loop
would instead preserve any initial velocity mismatch forever. The state
space requires positive speed, so updates that would drive v to zero or
below are clamped to a small floor and flagged.

The reciprocal-barrier loop controls the plain unicycle: the longitudinal
velocity is the reference v_s applied directly and only the angular
velocity is filtered.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, fields

from .barrier import (
    BarrierDomainError,
    DFunction,
    ExtendedState,
    PlainDistanceD,
    SmoothBumpD,
    eval_rcbf,
    lie_derivatives,
    with_reference,
)
from .field import SourceField
from .geometry import Environment, PenetrationError, sensor_read, wrap_angle
from .safeqp import (
    CASE_DEGENERATE,
    CASE_INFEASIBLE,
    CASE_NOMINAL,
    InputBox,
    solve_boxed_qp,
    solve_rcbf_qp,
    solve_zcbf_qp,
)
from .seek import ReferenceDifferentiator, SeekGains, seek_reference

STATUS_CONVERGED = "converged"
STATUS_TIMEOUT = "timeout"
STATUS_SAFETY_VIOLATION = "safety_violation"
STATUS_QP_DEGENERATE = "qp_degenerate"

VARIANT_ZCBF = "zcbf"
VARIANT_RCBF = "rcbf"
VARIANT_RAW = "raw"   # unfiltered source seeking on the extended loop


@dataclass(frozen=True)
class InitialState:
    x: float
    y: float
    theta: float
    v: float = 0.1


@dataclass(frozen=True)
class ControllerConfig:
    """Controller variant plus every barrier/filter parameter."""

    variant: str
    gains: SeekGains
    delta: float = 0.1
    kappa: float = 1.0
    kappa3: float = 1.0
    d_kind: str = "smooth_bump"
    gamma: float = 2.0
    box: InputBox | None = None

    def __post_init__(self):
        if self.variant not in (VARIANT_ZCBF, VARIANT_RCBF, VARIANT_RAW):
            raise ValueError(f"unknown controller variant {self.variant!r}")
        if self.d_kind not in ("smooth_bump", "plain"):
            raise ValueError(f"unknown distance-function kind {self.d_kind!r}")
        if self.delta <= 0.0:
            raise ValueError("delta must be positive")
        if self.kappa <= 0.0 or self.kappa3 <= 0.0:
            raise ValueError("class-K slopes kappa, kappa3 must be positive")
        if self.gamma <= 0.0:
            raise ValueError("gamma must be positive")

    def build_d_function(self, env: Environment) -> DFunction:
        if self.d_kind == "plain":
            return PlainDistanceD()
        return SmoothBumpD(gamma=self.gamma, d_cons=env.d_cons)


@dataclass(frozen=True)
class SimConfig:
    dt: float
    t_max: float
    initial: InitialState
    controller: ControllerConfig
    stop_radius: float = 0.05
    max_range: float = math.inf
    v_floor: float = 1e-3
    source: tuple[float, float] | None = None  # defaults to the field's source

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.t_max <= self.dt:
            raise ValueError("t_max must exceed dt")
        if self.stop_radius <= 0.0:
            raise ValueError("stop_radius must be positive")
        if self.v_floor <= 0.0:
            raise ValueError("v_floor must be positive")


@dataclass(frozen=True)
class StepRecord:
    """One row of the trajectory log (state before the step, inputs applied)."""

    time: float
    x: float
    y: float
    theta: float
    v: float
    v_ref: float
    a_ref: float
    omega_ref: float
    a_cmd: float
    omega_cmd: float
    h: float
    big_h: float
    lambda_star: float
    active: bool
    qp_case: str
    d_ro: float
    distance_boundary: float
    distance_source: float
    v_clamped: bool
    box_infeasible: bool
    barrier_hold: bool


CSV_COLUMNS = [f.name for f in fields(StepRecord)]


@dataclass
class TrajectoryLog:
    records: list[StepRecord]
    status: str
    source: tuple[float, float]
    dt: float

    def csv_text(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for record in self.records:
            writer.writerow([
                repr(value) if isinstance(value, float)
                else int(value) if isinstance(value, bool)
                else value
                for value in (getattr(record, name) for name in CSV_COLUMNS)
            ])
        return buffer.getvalue()

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(self.csv_text())

    def summary(self) -> dict:
        last = self.records[-1]
        boundary = [
            r.distance_boundary for r in self.records
            if math.isfinite(r.distance_boundary)
        ]
        return {
            "status": self.status,
            "converged": self.status == STATUS_CONVERGED,
            "steps": max(0, len(self.records) - 1),
            "t_final": last.time,
            "final_position": [last.x, last.y],
            "final_distance_source": last.distance_source,
            "min_distance_boundary": min(boundary) if boundary else None,
        }


@dataclass(frozen=True)
class Pose:
    """Plain unicycle pose (reciprocal-barrier loop state)."""

    x: float
    y: float
    theta: float


@dataclass(frozen=True)
class Observation:
    reading: object
    distance_source: float
    distance_boundary: float
    d_ro: float


def _nan_controls():
    return dict(v_ref=math.nan, a_ref=math.nan, omega_ref=math.nan,
                a_cmd=math.nan, omega_cmd=math.nan, h=math.nan,
                big_h=math.nan, lambda_star=math.nan, active=False,
                qp_case="", v_clamped=False, box_infeasible=False,
                barrier_hold=False)


def _state_record(state, time, obs: Observation) -> StepRecord:
    return StepRecord(
        time=time, x=state.x, y=state.y, theta=state.theta,
        v=getattr(state, "v", math.nan),
        d_ro=obs.d_ro, distance_boundary=obs.distance_boundary,
        distance_source=obs.distance_source, **_nan_controls(),
    )


def _penetration_record(state, time, source, err: PenetrationError) -> StepRecord:
    dx = state.x - source[0]
    dy = state.y - source[1]
    return StepRecord(
        time=time, x=state.x, y=state.y, theta=state.theta,
        v=getattr(state, "v", math.nan),
        d_ro=math.nan, distance_boundary=-err.depth,
        distance_source=math.hypot(dx, dy), **_nan_controls(),
    )


class _ZcbfStepper:
    """Extended-state loop; also runs the unfiltered ('raw') variant."""

    def __init__(self, config: SimConfig, env: Environment, field: SourceField,
                 source: tuple[float, float]):
        self.config = config
        self.env = env
        self.field = field
        self.source = source
        self.ctrl = config.controller
        self.d_fn = self.ctrl.build_d_function(env)
        self.differentiator = ReferenceDifferentiator()

    def initial_state(self) -> ExtendedState:
        init = self.config.initial
        return ExtendedState(x=init.x, y=init.y, theta=init.theta, v=init.v)

    def observe(self, state: ExtendedState, time: float) -> Observation:
        reading = sensor_read(
            (state.x, state.y), self.env, self.field, time,
            self.config.max_range,
        )
        dist_source = math.hypot(
            state.x - self.source[0], state.y - self.source[1]
        )
        if reading.obstacle is None:
            return Observation(reading, dist_source, math.inf, math.inf)
        return Observation(
            reading, dist_source,
            reading.obstacle.distance_boundary, reading.obstacle.d_ro,
        )

    def advance(self, state: ExtendedState, time: float,
                obs: Observation) -> tuple[ExtendedState, StepRecord]:
        cfg = self.config
        v_s, omega_s = seek_reference(state.theta, obs.reading.gradient,
                                      self.ctrl.gains)
        a_s = self.differentiator.update(time, v_s)
        u_ref = (a_s, omega_s)

        h = math.nan
        big_h = math.nan
        lam = 0.0
        active = False
        case = CASE_NOMINAL
        a_cmd, omega_cmd = u_ref
        box_infeasible = False

        if obs.reading.obstacle is not None:
            ev = with_reference(
                lie_derivatives(state, obs.reading.obstacle,
                                self.ctrl.delta, self.d_fn),
                u_ref, self.ctrl.kappa,
            )
            h, big_h, active = ev.h, ev.H, ev.active
            if self.ctrl.variant == VARIANT_ZCBF:
                if self.ctrl.box is not None:
                    result = solve_boxed_qp(ev, u_ref, self.ctrl.box)
                else:
                    result = solve_zcbf_qp(ev, u_ref)
                case = result.case
                lam = result.lambda_star
                if case == CASE_INFEASIBLE:
                    # Safety projection preferred, clipped into the box; the
                    # step is flagged since safety cannot be certified.
                    clipped = self.ctrl.box.clip(result.u_star)
                    a_cmd, omega_cmd = float(clipped[0]), float(clipped[1])
                    box_infeasible = True
                else:
                    a_cmd, omega_cmd = float(result.u_star[0]), float(result.u_star[1])

        x_next = state.x + cfg.dt * state.v * math.cos(state.theta)
        y_next = state.y + cfg.dt * state.v * math.sin(state.theta)
        theta_next = wrap_angle(state.theta + cfg.dt * omega_cmd)
        if case == CASE_NOMINAL:
            v_target = v_s
        else:
            v_target = state.v + cfg.dt * a_cmd
        clamped = v_target < cfg.v_floor
        v_next = cfg.v_floor if clamped else v_target

        record = StepRecord(
            time=time, x=state.x, y=state.y, theta=state.theta, v=state.v,
            v_ref=v_s, a_ref=a_s, omega_ref=omega_s,
            a_cmd=a_cmd, omega_cmd=omega_cmd,
            h=h, big_h=big_h, lambda_star=lam, active=active, qp_case=case,
            d_ro=obs.d_ro, distance_boundary=obs.distance_boundary,
            distance_source=obs.distance_source,
            v_clamped=clamped, box_infeasible=box_infeasible,
            barrier_hold=False,
        )
        next_state = ExtendedState(x=x_next, y=y_next, theta=theta_next,
                                   v=v_next)
        return next_state, record


class _RcbfStepper:
    """Plain unicycle loop: v = v_s applied directly, omega filtered."""

    def __init__(self, config: SimConfig, env: Environment, field: SourceField,
                 source: tuple[float, float]):
        self.config = config
        self.env = env
        self.field = field
        self.source = source
        self.ctrl = config.controller
        self.d_fn = self.ctrl.build_d_function(env)
        self.last_safe_omega: float | None = None

    def initial_state(self) -> Pose:
        init = self.config.initial
        return Pose(x=init.x, y=init.y, theta=init.theta)

    def observe(self, state: Pose, time: float) -> Observation:
        reading = sensor_read(
            (state.x, state.y), self.env, self.field, time,
            self.config.max_range,
        )
        dist_source = math.hypot(
            state.x - self.source[0], state.y - self.source[1]
        )
        if reading.obstacle is None:
            return Observation(reading, dist_source, math.inf, math.inf)
        return Observation(
            reading, dist_source,
            reading.obstacle.distance_boundary, reading.obstacle.d_ro,
        )

    def advance(self, state: Pose, time: float,
                obs: Observation) -> tuple[Pose, StepRecord]:
        cfg = self.config
        v_s, omega_s = seek_reference(state.theta, obs.reading.gradient,
                                      self.ctrl.gains)
        omega_cmd = omega_s
        h = math.nan
        lam = 0.0
        case = CASE_NOMINAL
        hold = False

        if obs.reading.obstacle is not None:
            try:
                ev = eval_rcbf(state.x, state.y, state.theta, v_s,
                               obs.reading.obstacle, self.ctrl.delta,
                               self.d_fn)
            except BarrierDomainError:
                # Margin trespassed by the discrete update: the reciprocal
                # barrier is undefined here, so hold the last safe turn
                # command until the boundary distance recovers.
                omega_cmd = (omega_s if self.last_safe_omega is None
                             else self.last_safe_omega)
                hold = True
            else:
                result = solve_rcbf_qp(ev, omega_s, self.ctrl.kappa3)
                omega_cmd = float(result.u_star[0])
                h = ev.h
                lam = result.lambda_star
                case = result.case
                self.last_safe_omega = omega_cmd

        x_next = state.x + cfg.dt * v_s * math.cos(state.theta)
        y_next = state.y + cfg.dt * v_s * math.sin(state.theta)
        theta_next = wrap_angle(state.theta + cfg.dt * omega_cmd)

        record = StepRecord(
            time=time, x=state.x, y=state.y, theta=state.theta, v=v_s,
            v_ref=v_s, a_ref=math.nan, omega_ref=omega_s,
            a_cmd=math.nan, omega_cmd=omega_cmd,
            h=h, big_h=math.nan, lambda_star=lam,
            active=case != CASE_NOMINAL, qp_case=case,
            d_ro=obs.d_ro, distance_boundary=obs.distance_boundary,
            distance_source=obs.distance_source,
            v_clamped=False, box_infeasible=False, barrier_hold=hold,
        )
        return Pose(x=x_next, y=y_next, theta=theta_next), record


def _resolve_source(config: SimConfig, field: SourceField) -> tuple[float, float]:
    if config.source is not None:
        return (float(config.source[0]), float(config.source[1]))
    source = getattr(field, "source", None)
    if source is None:
        raise ValueError(
            "convergence target unknown: set SimConfig.source for custom fields"
        )
    return (float(source[0]), float(source[1]))


def make_stepper(config: SimConfig, env: Environment, field: SourceField):
    source = _resolve_source(config, field)
    if config.controller.variant == VARIANT_RCBF:
        return _RcbfStepper(config, env, field, source)
    return _ZcbfStepper(config, env, field, source)


def run(config: SimConfig, env: Environment, field: SourceField) -> TrajectoryLog:
    """Run the closed loop until convergence, timeout, or a safety event."""
    source = _resolve_source(config, field)
    stepper = make_stepper(config, env, field)
    state = stepper.initial_state()
    max_steps = int(math.floor(config.t_max / config.dt + 1e-9))
    records: list[StepRecord] = []
    status = STATUS_TIMEOUT

    for step_index in range(max_steps + 1):
        time = step_index * config.dt
        try:
            obs = stepper.observe(state, time)
        except PenetrationError as err:
            records.append(_penetration_record(state, time, source, err))
            status = STATUS_SAFETY_VIOLATION
            break
        if obs.distance_source <= config.stop_radius:
            records.append(_state_record(state, time, obs))
            status = STATUS_CONVERGED
            break
        if step_index >= max_steps:
            records.append(_state_record(state, time, obs))
            status = STATUS_TIMEOUT
            break
        state, record = stepper.advance(state, time, obs)
        records.append(record)
        if record.qp_case == CASE_DEGENERATE:
            status = STATUS_QP_DEGENERATE
            break

    return TrajectoryLog(records=records, status=status, source=source,
                         dt=config.dt)
