"""Monte-Carlo benchmark harness.

Reproduces the randomized-environment evaluation protocol: for each run a
seeded environment (circular obstacles with radii drawn from a fixed set,
rejection-sampled for pairwise clearance) and one initial pose are
generated once and fed to every controller variant, so all variants face
identical conditions run by run. Two metrics are collected per run:

    T_c   - time to reach the final 20% of the initial source distance
    D_obs - closest boundary distance encountered over the whole run

Summary statistics use type-7 (linear interpolation) quartiles with
1.5 IQR whiskers; the per-run rows are emitted alongside so every summary
number is recomputable.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .field import QuadraticField
from .geometry import Circle, Environment, closest_obstacle, validate_environment
from .sim import (
    STATUS_CONVERGED,
    ControllerConfig,
    InitialState,
    SimConfig,
    TrajectoryLog,
    VARIANT_ZCBF,
    run,
)


def metric_tc(log: TrajectoryLog, source) -> float | None:
    """First time the source distance drops to 20% of its initial value.

    Returns None when the log never crosses the threshold.
    """
    if not log.records:
        raise ValueError("empty trajectory log")
    threshold = 0.2 * log.records[0].distance_source
    for record in log.records:
        if record.distance_source <= threshold:
            return record.time
    return None


def metric_dobs(log: TrajectoryLog) -> float:
    """Minimum boundary distance over the run; +inf when no obstacle was ever
    in range ("no obstacle encountered")."""
    if not log.records:
        raise ValueError("empty trajectory log")
    return min(record.distance_boundary for record in log.records)


def quantile_type7(values, q: float) -> float:
    """Linear interpolation between order statistics (type 7)."""
    ordered = sorted(float(v) for v in values)
    if not ordered:
        raise ValueError("quantile of empty data")
    if len(ordered) == 1:
        return ordered[0]
    pos = (len(ordered) - 1) * q
    lo = int(math.floor(pos))
    hi = min(lo + 1, len(ordered) - 1)
    frac = pos - lo
    return ordered[lo] * (1.0 - frac) + ordered[hi] * frac


@dataclass(frozen=True)
class BoxStats:
    """Box-plot summary: median, quartiles, 1.5 IQR whiskers, outliers."""

    median: float
    q1: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: tuple[float, ...]
    count: int

    @classmethod
    def from_samples(cls, values) -> "BoxStats":
        data = sorted(float(v) for v in values)
        q1 = quantile_type7(data, 0.25)
        q2 = quantile_type7(data, 0.50)
        q3 = quantile_type7(data, 0.75)
        iqr = q3 - q1
        lo_limit = q1 - 1.5 * iqr
        hi_limit = q3 + 1.5 * iqr
        inside = [v for v in data if lo_limit <= v <= hi_limit]
        outliers = tuple(v for v in data if v < lo_limit or v > hi_limit)
        return cls(
            median=q2, q1=q1, q3=q3,
            whisker_low=min(inside), whisker_high=max(inside),
            outliers=outliers, count=len(data),
        )


@dataclass(frozen=True)
class VariantSpec:
    name: str
    controller: ControllerConfig


@dataclass(frozen=True)
class McConfig:
    """Monte-Carlo campaign description."""

    variants: tuple[VariantSpec, ...]
    runs: int = 50
    seed: int = 0
    workspace: tuple[float, float, float, float] = (0.0, 10.0, 0.0, 10.0)
    obstacle_count: int = 9
    radius_set: tuple[float, ...] = (0.7, 0.8, 0.9, 1.0, 1.2)
    d_safe: float = 0.1
    d_min: float = 0.8
    source: tuple[float, float] = (0.0, 0.0)
    field_matrix: tuple[tuple[float, float], tuple[float, float]] = (
        (1.0, 0.0), (0.0, 1.0),
    )
    dt: float = 0.002
    t_max: float = 120.0
    stop_radius: float = 0.05
    initial_speed: float = 0.1
    max_layout_attempts: int = 2000

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if not self.variants:
            raise ValueError("at least one controller variant is required")


@dataclass(frozen=True)
class RunRow:
    variant: str
    run_index: int
    seed: int
    env_hash: str
    status: str
    t_c: float | None
    d_obs: float
    steps: int


@dataclass
class McReport:
    """Per-run rows plus per-variant box statistics for both metrics."""

    config: McConfig
    rows: list[RunRow]
    summaries: dict[str, dict[str, BoxStats]]
    header: dict[str, str] = field(default_factory=dict)

    def rows_for(self, variant: str) -> list[RunRow]:
        return [row for row in self.rows if row.variant == variant]

    def csv_text(self) -> str:
        lines = ["variant,run_index,seed,env_hash,status,t_c,d_obs,steps"]
        for row in self.rows:
            t_c = "" if row.t_c is None else repr(row.t_c)
            d_obs = "inf" if math.isinf(row.d_obs) else repr(row.d_obs)
            lines.append(
                f"{row.variant},{row.run_index},{row.seed},{row.env_hash},"
                f"{row.status},{t_c},{d_obs},{row.steps}"
            )
        return "\n".join(lines) + "\n"

    def json_text(self) -> str:
        payload = {
            "header": self.header,
            "summaries": {
                variant: {
                    metric: {
                        "median": stats.median,
                        "q1": stats.q1,
                        "q3": stats.q3,
                        "whisker_low": stats.whisker_low,
                        "whisker_high": stats.whisker_high,
                        "outliers": list(stats.outliers),
                        "count": stats.count,
                    }
                    for metric, stats in metrics.items()
                }
                for variant, metrics in self.summaries.items()
            },
            "census": self.census(),
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def census(self) -> dict[str, dict]:
        """Safety census per variant: convergence and margin-keeping.

        The zeroing-barrier loop is held to zero margin trespass
        (D_obs >= d_safe on every run); angular-only filtering may dip
        below the margin by at most the discretization slack and must
        never reach the boundary itself.
        """
        out = {}
        for spec in self.config.variants:
            rows = self.rows_for(spec.name)
            finite = [row.d_obs for row in rows if math.isfinite(row.d_obs)]
            min_dobs = min(finite) if finite else math.inf
            converged = all(row.status == STATUS_CONVERGED for row in rows)
            entry = {
                "all_converged": converged,
                "min_d_obs": min_dobs,
                "trespass_runs": sum(
                    1 for row in rows if row.d_obs < self.config.d_safe
                ),
            }
            if spec.controller.variant == VARIANT_ZCBF:
                entry["pass"] = converged and min_dobs >= self.config.d_safe
            else:
                entry["pass"] = (
                    converged
                    and min_dobs > 0.0
                    and min_dobs >= self.config.d_safe - 0.02
                )
            out[spec.name] = entry
        return out

    def census_pass(self) -> bool:
        return all(entry["pass"] for entry in self.census().values())


def environment_hash(env: Environment) -> str:
    """Stable digest of an obstacle layout (for shared-seed auditing)."""
    parts = []
    for obstacle in env.obstacles:
        if isinstance(obstacle, Circle):
            parts.append(
                ("circle", round(obstacle.center[0], 12),
                 round(obstacle.center[1], 12), round(obstacle.radius, 12))
            )
        else:
            parts.append(
                ("segment", obstacle.endpoint_a, obstacle.endpoint_b,
                 obstacle.thickness)
            )
    blob = json.dumps(parts, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def generate_environment(rng: np.random.Generator, config: McConfig) -> Environment:
    """Rejection-sample circle centers in the workspace.

    Accepts a layout when pairwise boundary clearance is at least d_min
    and the source keeps d_safe + d_cons boundary clearance (so the source
    sits on the barrier plateau, inside the safe region). Raises after the
    configured attempt budget with a diagnostic.
    """
    xmin, xmax, ymin, ymax = config.workspace
    d_cons = 0.5 * config.d_min - config.d_safe
    source_clearance = config.d_safe + d_cons
    for _ in range(config.max_layout_attempts):
        radii = [
            float(rng.choice(np.asarray(config.radius_set)))
            for _ in range(config.obstacle_count)
        ]
        centers: list[tuple[float, float]] = []
        ok = True
        for radius in radii:
            placed = False
            for _ in range(200):
                cx = float(rng.uniform(xmin, xmax))
                cy = float(rng.uniform(ymin, ymax))
                src_gap = math.hypot(cx - config.source[0], cy - config.source[1])
                if src_gap - radius < source_clearance:
                    continue
                if all(
                    math.hypot(cx - ox, cy - oy) - radius - orad >= config.d_min
                    for (ox, oy), orad in zip(centers, radii)
                ):
                    centers.append((cx, cy))
                    placed = True
                    break
            if not placed:
                ok = False
                break
        if not ok:
            continue
        env = Environment(
            obstacles=tuple(
                Circle(center=center, radius=radius)
                for center, radius in zip(centers, radii)
            ),
            bounds=config.workspace,
            d_safe=config.d_safe,
            d_min=config.d_min,
        )
        if not validate_environment(env):
            return env
    raise RuntimeError(
        f"could not place {config.obstacle_count} obstacles with clearance "
        f">= {config.d_min} m in {config.max_layout_attempts} attempts"
    )


def sample_initial_pose(rng: np.random.Generator, env: Environment,
                        config: McConfig) -> InitialState:
    """Uniform free-space position with plateau clearance, uniform heading."""
    xmin, xmax, ymin, ymax = config.workspace
    clearance = config.d_safe + env.d_cons
    for _ in range(100000):
        x = float(rng.uniform(xmin, xmax))
        y = float(rng.uniform(ymin, ymax))
        gaps = [
            math.hypot(x - obstacle.center[0], y - obstacle.center[1])
            - obstacle.radius
            for obstacle in env.obstacles
        ]
        if min(gaps) < clearance:
            continue
        if math.hypot(x - config.source[0], y - config.source[1]) <= config.stop_radius:
            continue
        theta = float(rng.uniform(-math.pi, math.pi))
        return InitialState(x=x, y=y, theta=theta, v=config.initial_speed)
    raise RuntimeError("could not sample a free initial pose")


def run_monte_carlo(config: McConfig, progress=None) -> McReport:
    """Execute the campaign: shared seeded conditions across variants.

    ``progress`` is an optional callback(run_index, variant_name, row).
    """
    field_obj = QuadraticField(matrix=config.field_matrix, source=config.source)
    rows: list[RunRow] = []
    for run_index in range(config.runs):
        rng = np.random.default_rng((config.seed, run_index))
        env = generate_environment(rng, config)
        pose = sample_initial_pose(rng, env, config)
        env_digest = environment_hash(env)
        for spec in config.variants:
            sim_config = SimConfig(
                dt=config.dt,
                t_max=config.t_max,
                initial=pose,
                controller=spec.controller,
                stop_radius=config.stop_radius,
                source=config.source,
            )
            log = run(sim_config, env, field_obj)
            t_c = metric_tc(log, config.source)
            row = RunRow(
                variant=spec.name,
                run_index=run_index,
                seed=config.seed,
                env_hash=env_digest,
                status=log.status,
                t_c=t_c,
                d_obs=metric_dobs(log),
                steps=max(0, len(log.records) - 1),
            )
            rows.append(row)
            if progress is not None:
                progress(run_index, spec.name, row)

    summaries: dict[str, dict[str, BoxStats]] = {}
    for spec in config.variants:
        variant_rows = [row for row in rows if row.variant == spec.name]
        tc_values = [row.t_c for row in variant_rows if row.t_c is not None]
        dobs_values = [
            row.d_obs for row in variant_rows if math.isfinite(row.d_obs)
        ]
        summaries[spec.name] = {}
        if tc_values:
            summaries[spec.name]["t_c"] = BoxStats.from_samples(tc_values)
        if dobs_values:
            summaries[spec.name]["d_obs"] = BoxStats.from_samples(dobs_values)

    header = {
        "initial_distribution": (
            "position uniform over free workspace with boundary clearance "
            ">= d_safe + d_cons; heading uniform on (-pi, pi]; "
            f"initial speed {config.initial_speed} m/s"
        ),
        "quartile_method": "type 7 (linear interpolation between order statistics)",
        "seed": str(config.seed),
        "runs": str(config.runs),
    }
    return McReport(config=config, rows=rows, summaries=summaries, header=header)
