"""Safety-filter quadratic programs in closed form.

The pointwise problem is min 0.5*||u - u_ref||^2 subject to one affine
barrier constraint; the KKT system gives the minimizer analytically:

    u* = u_ref                                  if H >= 0 or ||Lgh|| = 0
    u* = u_ref - Lgh^T * H / ||Lgh||^2          otherwise

with multiplier lambda* = -H / ||Lgh||^2. A box-constrained variant solves
the same projection over the intersection with an admissible input box by
geometric candidate enumeration, and a generic brute-force active-set
oracle provides the independent cross-check used throughout the tests.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .barrier import LGH_EPS_SQ, BarrierEval, RcbfEval

#: QP solve outcomes.
CASE_NOMINAL = "nominal"        # u* = u_ref, constraint slack
CASE_PROJECTED = "projected"    # barrier constraint active at u*
CASE_CLIPPED = "clipped"        # box active, barrier slack (boxed variant)
CASE_DEGENERATE = "degenerate"  # H < 0 with vanishing ||Lgh||
CASE_INFEASIBLE = "infeasible"  # box and half-space do not intersect


@dataclass(frozen=True)
class QPResult:
    """Solution of one safety-filter QP.

    ``constraint_residual`` is the barrier constraint value at u*
    (non-negative means satisfied; exactly zero, up to rounding, in the
    projected case). ``lambda_star`` is the barrier multiplier.
    """

    u_star: np.ndarray
    lambda_star: float
    case: str
    constraint_residual: float


def _require_finite(*values):
    for value in values:
        if not math.isfinite(value):
            raise ValueError("non-finite input to safety QP")


def solve_zcbf_qp(ev: BarrierEval, u_ref) -> QPResult:
    """Closed-form filter for the extended-input constraint Lfh + Lgh.u + a(h) >= 0.

    ``ev`` must carry an assembled H (see barrier.with_reference).
    """
    u_ref = np.array([float(u_ref[0]), float(u_ref[1])])
    lgh = ev.Lgh
    _require_finite(ev.H, lgh[0], lgh[1], u_ref[0], u_ref[1])
    norm_sq = float(lgh[0] ** 2 + lgh[1] ** 2)
    if ev.H >= 0.0:
        return QPResult(u_ref, 0.0, CASE_NOMINAL, ev.H)
    if norm_sq < LGH_EPS_SQ:
        return QPResult(u_ref, 0.0, CASE_DEGENERATE, ev.H)
    lam = -ev.H / norm_sq
    u_star = u_ref + lam * lgh
    residual = ev.H + float(lgh @ (u_star - u_ref))
    return QPResult(u_star, lam, CASE_PROJECTED, residual)


def solve_rcbf_qp(ev: RcbfEval, omega_s: float, kappa3: float) -> QPResult:
    """Scalar filter: min (w - omega_s)^2 s.t. LfB + LgB*w - kappa3*h <= 0."""
    _require_finite(ev.LfB, ev.LgB, ev.h, omega_s)
    slack = ev.LfB + ev.LgB * omega_s - kappa3 * ev.h
    if slack <= 0.0:
        return QPResult(np.array([omega_s]), 0.0, CASE_NOMINAL, slack)
    if abs(ev.LgB) < math.sqrt(LGH_EPS_SQ):
        return QPResult(np.array([omega_s]), 0.0, CASE_DEGENERATE, slack)
    omega = (kappa3 * ev.h - ev.LfB) / ev.LgB
    residual = ev.LfB + ev.LgB * omega - kappa3 * ev.h
    lam = slack / (ev.LgB * ev.LgB)
    return QPResult(np.array([omega]), lam, CASE_PROJECTED, residual)


@dataclass(frozen=True)
class InputBox:
    """Admissible input set: a in [a_min, a_max], omega in [w_min, w_max]."""

    a_min: float
    a_max: float
    omega_min: float
    omega_max: float

    def __post_init__(self):
        if self.a_min > self.a_max or self.omega_min > self.omega_max:
            raise ValueError("input box must be non-empty")

    def clip(self, u) -> np.ndarray:
        return np.array([
            min(max(float(u[0]), self.a_min), self.a_max),
            min(max(float(u[1]), self.omega_min), self.omega_max),
        ])

    def contains(self, u, tol: float = 0.0) -> bool:
        return (self.a_min - tol <= u[0] <= self.a_max + tol
                and self.omega_min - tol <= u[1] <= self.omega_max + tol)


def solve_boxed_qp(ev: BarrierEval, u_ref, box: InputBox) -> QPResult:
    """Exact minimizer over halfspace {Lfh + Lgh.u + a(h) >= 0} and box.

    If the box-clipped reference satisfies the barrier constraint it is
    optimal. Otherwise the barrier constraint is active and the minimizer
    is the clamp of the unboxed projection onto the segment where the
    constraint boundary crosses the box; an empty crossing means the two
    sets do not intersect and safety cannot be certified within the box,
    reported as an infeasible result carrying the unboxed projection.
    """
    u_ref = np.array([float(u_ref[0]), float(u_ref[1])])
    lgh = ev.Lgh
    _require_finite(ev.H, lgh[0], lgh[1], u_ref[0], u_ref[1])
    norm_sq = float(lgh[0] ** 2 + lgh[1] ** 2)

    def constraint(u):
        # Affine constraint value, anchored so that constraint(u_ref) = H.
        return ev.H + float(lgh @ (u - u_ref))

    clipped = box.clip(u_ref)
    slack = constraint(clipped)
    if slack >= 0.0:
        case = CASE_NOMINAL if bool(np.all(clipped == u_ref)) else CASE_CLIPPED
        return QPResult(clipped, 0.0, case, slack)
    if norm_sq < LGH_EPS_SQ:
        return QPResult(clipped, 0.0, CASE_DEGENERATE, slack)

    # Barrier active: optimize along {constraint = 0} inside the box.
    anchor = u_ref - lgh * (ev.H / norm_sq)  # unboxed projection
    tangent = np.array([-lgh[1], lgh[0]]) / math.sqrt(norm_sq)
    lo, hi = -math.inf, math.inf
    for axis, (low, high) in enumerate(
        [(box.a_min, box.a_max), (box.omega_min, box.omega_max)]
    ):
        direction = tangent[axis]
        base = anchor[axis]
        if abs(direction) < 1e-15:
            if not (low - 1e-12 <= base <= high + 1e-12):
                lo, hi = math.inf, -math.inf
                break
            continue
        t0 = (low - base) / direction
        t1 = (high - base) / direction
        lo = max(lo, min(t0, t1))
        hi = min(hi, max(t0, t1))
    if lo > hi:
        lam = -ev.H / norm_sq
        return QPResult(anchor, lam, CASE_INFEASIBLE, 0.0)

    t_star = min(max(0.0, lo), hi)
    u_star = anchor + t_star * tangent
    lam = max(0.0, float(lgh @ (u_star - u_ref)) / norm_sq)
    return QPResult(u_star, lam, CASE_PROJECTED, constraint(u_star))


@dataclass(frozen=True)
class OracleResult:
    """Output of the brute-force active-set oracle."""

    u: np.ndarray | None
    multipliers: np.ndarray | None
    objective: float
    feasible: bool


def qp_oracle(quadratic, linear, constraint_matrix, constraint_rhs,
              tol: float = 1e-9) -> OracleResult:
    """Brute-force active-set solve of min 0.5 u'Qu + c'u s.t. A u <= b.

    Enumerates every subset of constraints as a candidate active set,
    solves the corresponding equality-constrained KKT system, and keeps
    the best candidate with non-negative multipliers that satisfies all
    constraints. Exact for small instances (intended for <= 5 rows); Q
    must be positive definite.
    """
    q_mat = np.asarray(quadratic, dtype=float)
    c_vec = np.asarray(linear, dtype=float)
    a_mat = np.asarray(constraint_matrix, dtype=float).reshape(-1, q_mat.shape[0])
    b_vec = np.asarray(constraint_rhs, dtype=float).reshape(-1)
    n = q_mat.shape[0]
    m = a_mat.shape[0]

    best: OracleResult | None = None
    for size in range(0, min(n, m) + 1):
        for subset in itertools.combinations(range(m), size):
            rows = a_mat[list(subset)]
            kkt = np.zeros((n + size, n + size))
            kkt[:n, :n] = q_mat
            if size:
                kkt[:n, n:] = rows.T
                kkt[n:, :n] = rows
            rhs = np.concatenate([-c_vec, b_vec[list(subset)]])
            try:
                solution = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                continue
            u = solution[:n]
            lams = solution[n:]
            if np.any(lams < -tol):
                continue
            if m and np.any(a_mat @ u - b_vec > tol):
                continue
            objective = 0.5 * float(u @ q_mat @ u) + float(c_vec @ u)
            if best is None or objective < best.objective - 1e-15:
                multipliers = np.zeros(m)
                multipliers[list(subset)] = np.maximum(lams, 0.0)
                best = OracleResult(u, multipliers, objective, True)
    if best is None:
        return OracleResult(None, None, math.inf, False)
    return best


def kkt_certificate(result: QPResult, ev: BarrierEval, u_ref) -> dict[str, float]:
    """Residuals of the four KKT conditions for a returned extended-input solution.

    Returns a dict of non-negative violation magnitudes: stationarity
    ||(u* - u_ref) - lambda*Lgh'||, primal feasibility max(0, -residual),
    dual feasibility max(0, -lambda*), and complementarity |lambda* * residual|.
    """
    u_ref = np.asarray(u_ref, dtype=float)
    stationarity = float(
        np.linalg.norm((result.u_star - u_ref) - result.lambda_star * ev.Lgh)
    )
    return {
        "stationarity": stationarity,
        "primal": max(0.0, -result.constraint_residual),
        "dual": max(0.0, -result.lambda_star),
        "complementarity": abs(result.lambda_star * result.constraint_residual),
    }
