"""Online deployment episodes.

Each simulation step the model predicts a preference vector from the current
features, the flock executes it, and the user (simulated or live) may answer
with a ternary instruction.  Nonzero instructions become training labels
(prediction nudged 0.1 per flagged behavior) and trigger one online SGD step
on a sliding window of recent labels.  An episode converges after ten
consecutive satisfied steps; maximal runs of instruction steps, bridging
satisfied gaps of at most three steps, are the intervention phases whose
duration and count quantify adaptation effort.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import flocking
from .network import ModelParams, forward, loss, make_features, sgd_step_arrays
from .planner import build_grid, plan
from .users import Instruction, UserProfile, instruct
from .world import (
    Arena,
    PreferenceVector,
    RobotState,
    classify_situation,
    denormalize,
    flock_centroid,
    measure_motion_status,
    normalize,
)


@dataclass(frozen=True)
class RuntimeConfig:
    """Episode loop settings."""

    online_lr: float = 0.05
    buffer_window: int = 16
    label_step: float = 0.1
    step_cap: int = 600
    convergence_run: int = 10
    phase_gap: int = 3
    near_obstacle_m: float = 25.0
    near_target_m: float = 25.0
    n_robots: int = 5
    spawn_center: tuple[float, float, float] = (20.0, 20.0, 15.0)
    spawn_ring_radius: float = 2.8
    spawn_jitter: float = 1.0
    spawn_speed: float = 5.5
    waypoint_reach_m: float = 5.0
    cell_size: float = 2.0
    robot_radius: float = 0.5
    seed: int = 0
    flock: flocking.FlockParams = field(default_factory=flocking.FlockParams)

    def with_seed(self, seed: int) -> "RuntimeConfig":
        return replace(self, seed=seed)


@dataclass(frozen=True)
class InterventionPhase:
    """Maximal run of correction steps (short satisfied gaps bridged)."""

    start_step: int
    end_step: int
    instruction_count: int

    @property
    def duration(self) -> int:
        return self.end_step - self.start_step + 1


@dataclass(frozen=True)
class TraceRow:
    step: int
    situation: str
    h_hat: np.ndarray
    r: np.ndarray
    instruction: Instruction


@dataclass(frozen=True)
class EpisodeReport:
    user_id: int
    ptype: str
    phases: tuple[InterventionPhase, ...]
    total_steps: int
    converged: bool
    final_loss: float
    trace: tuple[TraceRow, ...]

    @property
    def n_phases(self) -> int:
        return len(self.phases)

    @property
    def mean_phase_duration(self) -> float:
        if not self.phases:
            return 0.0
        return float(np.mean([p.duration for p in self.phases]))

    @property
    def total_intervention_steps(self) -> int:
        return sum(p.instruction_count for p in self.phases)


@dataclass(frozen=True)
class StepFrame:
    """What one control step exposes to the caller (and to live clients)."""

    step: int
    situation: str
    h_hat: np.ndarray
    r: np.ndarray
    robots: tuple[RobotState, ...]


class EpisodeEngine:
    """Stateful control loop shared by headless episodes and live sessions.

    ``tick`` runs one step: features -> prediction -> flock step -> measure.
    ``feedback`` folds one instruction into the model (label, buffer, one
    online SGD step) against the features of the step just executed.
    """

    def __init__(self, model: ModelParams, arena: Arena, cfg: RuntimeConfig):
        self.model = model
        self.arena = arena
        self.cfg = cfg
        rng = np.random.default_rng(np.random.SeedSequence(entropy=(cfg.seed, 17)))
        center = np.asarray(cfg.spawn_center, dtype=float)
        self.goal = self._pick_goal()
        # launch at cruise: a ring formation at mid formation spacing, already
        # moving toward the goal at mid speed, so the first measurements sit
        # inside the flock's normal operating ranges
        to_goal = np.append(self.goal, center[2]) - center
        heading = to_goal / max(np.linalg.norm(to_goal), 1e-9)
        self.robots = []
        for k in range(cfg.n_robots):
            angle = 2.0 * np.pi * k / cfg.n_robots
            offset = np.array(
                [cfg.spawn_ring_radius * np.cos(angle), cfg.spawn_ring_radius * np.sin(angle), 0.0]
            )
            offset += rng.uniform(-cfg.spawn_jitter, cfg.spawn_jitter, size=3) * 0.2
            position = arena.clamp_position(center + offset)
            position[2] = max(position[2], 1.0)
            self.robots.append(RobotState(position=position, velocity=cfg.spawn_speed * heading))
        self.step_idx = 0
        self.buffer_x: list[np.ndarray] = []
        self.buffer_y: list[np.ndarray] = []
        self.feedback_steps: list[int] = []
        self.last_r = normalize(measure_motion_status(self.robots, arena)).as_array()
        self.last_features: np.ndarray | None = None
        self.last_situation: str | None = None
        self._planned_safety_m: float | None = None
        self._waypoints: list[np.ndarray] = []
        self._wp_idx = 0

    def _pick_goal(self) -> np.ndarray:
        start = np.asarray(self.cfg.spawn_center[:2], dtype=float)
        if not self.arena.targets:
            return np.array([self.arena.width / 2.0, self.arena.depth / 2.0])
        nearest = min(self.arena.targets, key=lambda t: np.linalg.norm(t.center - start))
        return np.asarray(nearest.center, dtype=float)

    def _ensure_plan(self, safety_m: float) -> None:
        if (
            self._planned_safety_m is not None
            and abs(safety_m - self._planned_safety_m) <= self.cfg.cell_size
        ):
            return
        start = flock_centroid(self.robots)[:2]
        grid = build_grid(
            self.arena, inflation=safety_m + self.cfg.robot_radius, cell_size=self.cfg.cell_size
        )
        try:
            path = plan(grid, start, self.goal)
            self._waypoints = [np.asarray(w) for w in path.waypoints]
        except ValueError:
            # Blocked endpoint or no corridor at this clearance: head straight
            # for the goal and let the avoidance term handle obstacles.
            self._waypoints = [self.goal.copy()]
        self._wp_idx = 0
        self._planned_safety_m = safety_m

    def _current_waypoint(self, centroid_xy: np.ndarray) -> np.ndarray:
        while (
            self._wp_idx < len(self._waypoints) - 1
            and np.linalg.norm(self._waypoints[self._wp_idx] - centroid_xy)
            < self.cfg.waypoint_reach_m
        ):
            self._wp_idx += 1
        return self._waypoints[self._wp_idx]

    def prediction(self) -> np.ndarray:
        """Model output for the features of the most recent tick."""
        if self.last_features is None:
            raise RuntimeError("no tick has run yet")
        return forward(self.model, self.last_features)

    def planned_waypoints(self) -> list[np.ndarray]:
        """Waypoints of the most recent global plan (empty before any tick)."""
        return [wp.copy() for wp in self._waypoints]

    def tick(self) -> StepFrame:
        """Advance the world by one control step under the model's preference."""
        cfg = self.cfg
        centroid = flock_centroid(self.robots)
        situation = classify_situation(
            centroid, self.arena, cfg.near_obstacle_m, cfg.near_target_m
        )
        features = make_features(
            self.last_r,
            situation.code,
            situation.dist_obstacle,
            situation.dist_target,
            cfg.near_obstacle_m,
            cfg.near_target_m,
        )
        h_hat = forward(self.model, features)
        self.last_features = features
        self.last_situation = situation.code

        pref = PreferenceVector.from_array(h_hat)
        phys = denormalize(pref)
        self._ensure_plan(phys.safety)
        waypoint_xy = self._current_waypoint(centroid[:2])
        waypoint = np.array([waypoint_xy[0], waypoint_xy[1], phys.height])
        self.robots = flocking.step(self.robots, waypoint, pref, self.arena, cfg.flock)
        self.last_r = normalize(measure_motion_status(self.robots, self.arena)).as_array()

        frame = StepFrame(
            step=self.step_idx,
            situation=situation.code,
            h_hat=h_hat,
            r=self.last_r.copy(),
            robots=tuple(self.robots),
        )
        self.step_idx += 1
        return frame

    def feedback(self, ins: Instruction) -> np.ndarray:
        """Apply one instruction to the model; returns the refreshed prediction."""
        if self.last_features is None:
            raise RuntimeError("no tick has run yet")
        if ins.is_zero():
            return self.prediction()
        label = np.clip(self.prediction() + self.cfg.label_step * ins.as_array(), 0.0, 1.0)
        self.buffer_x.append(self.last_features)
        self.buffer_y.append(label)
        window = self.cfg.buffer_window
        x = np.stack(self.buffer_x[-window:])
        y = np.stack(self.buffer_y[-window:])
        self.model = sgd_step_arrays(self.model, x, y, self.cfg.online_lr)
        self.feedback_steps.append(self.step_idx - 1)
        return self.prediction()

    def phases(self) -> tuple[InterventionPhase, ...]:
        return phases_from_steps(self.feedback_steps, self.cfg.phase_gap)


def phases_from_steps(nonzero_steps: list[int], gap: int) -> tuple[InterventionPhase, ...]:
    """Group instruction step indices into phases, bridging gaps of <= ``gap``."""
    phases = []
    group: list[int] = []
    for step in nonzero_steps:
        if group and step - group[-1] - 1 > gap:
            phases.append(InterventionPhase(group[0], group[-1], len(group)))
            group = []
        group.append(step)
    if group:
        phases.append(InterventionPhase(group[0], group[-1], len(group)))
    return tuple(phases)


def detect_phases(trace, gap: int = 3) -> tuple[InterventionPhase, ...]:
    """Intervention phases of a per-step trace (rows ordered by step)."""
    nonzero = [row.step for row in trace if not row.instruction.is_zero()]
    return phases_from_steps(nonzero, gap)


def run_episode(
    model: ModelParams, user: UserProfile, arena: Arena, cfg: RuntimeConfig
) -> tuple[ModelParams, EpisodeReport]:
    """Run one adaptation episode of ``user`` steering the model's flock."""
    engine = EpisodeEngine(model, arena, cfg)
    trace: list[TraceRow] = []
    satisfied_run = 0
    converged = False
    for _ in range(cfg.step_cap):
        frame = engine.tick()
        ins = instruct(user, frame.situation, PreferenceVector.from_array(frame.h_hat))
        trace.append(
            TraceRow(
                step=frame.step,
                situation=frame.situation,
                h_hat=frame.h_hat,
                r=frame.r,
                instruction=ins,
            )
        )
        if ins.is_zero():
            satisfied_run += 1
            if satisfied_run >= cfg.convergence_run:
                converged = True
                break
        else:
            satisfied_run = 0
            engine.feedback(ins)
    final_loss = loss(engine.prediction(), user.target_array(engine.last_situation))
    report = EpisodeReport(
        user_id=user.id,
        ptype=user.ptype.value,
        phases=detect_phases(trace, cfg.phase_gap),
        total_steps=len(trace),
        converged=converged,
        final_loss=final_loss,
        trace=tuple(trace),
    )
    return engine.model, report


def evaluate_suite(
    model: ModelParams,
    users: list[UserProfile],
    arena: Arena,
    cfg: RuntimeConfig,
    seeds,
    algo: str = "model",
) -> list[dict]:
    """Run every (user, seed) episode from a fresh copy of the checkpoint.

    Returns one metrics row per episode; keys starting with "_" carry raw
    per-phase durations for aggregation and are not written to CSV.
    """
    rows = []
    for user in users:
        for seed in seeds:
            _, report = run_episode(model, user, arena, cfg.with_seed(int(seed)))
            rows.append(
                {
                    "user_id": user.id,
                    "ptype": report.ptype,
                    "seed": int(seed),
                    "algo": algo,
                    "n_phases": report.n_phases,
                    "mean_phase_duration": report.mean_phase_duration,
                    "total_intervention_steps": report.total_intervention_steps,
                    "converged": report.converged,
                    "final_loss": report.final_loss,
                    "_durations": [p.duration for p in report.phases],
                }
            )
    return rows


def pooled_mean_duration(rows: list[dict]) -> float:
    """Mean intervention-phase duration pooled over all phases in ``rows``."""
    durations = [d for row in rows for d in row["_durations"]]
    return float(np.mean(durations)) if durations else 0.0


def summarize_by_type(rows: list[dict]) -> dict:
    """Per preference type: phase duration and phase count, mean and std."""
    out = {}
    for ptype in sorted({row["ptype"] for row in rows}):
        sub = [row for row in rows if row["ptype"] == ptype]
        durations = [d for row in sub for d in row["_durations"]]
        counts = [row["n_phases"] for row in sub]
        out[ptype] = {
            "mean_duration": float(np.mean(durations)) if durations else 0.0,
            "std_duration": float(np.std(durations)) if durations else 0.0,
            "mean_phases": float(np.mean(counts)),
            "std_phases": float(np.std(counts)),
            "episodes": len(sub),
        }
    return out


METRICS_FIELDS = (
    "user_id",
    "ptype",
    "seed",
    "algo",
    "n_phases",
    "mean_phase_duration",
    "total_intervention_steps",
    "converged",
    "final_loss",
)


def write_metrics_csv(path, rows: list[dict]) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(METRICS_FIELDS), extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def write_trace_jsonl(path, report: EpisodeReport) -> None:
    with open(path, "w") as fh:
        for row in report.trace:
            fh.write(
                json.dumps(
                    {
                        "step": row.step,
                        "situation": row.situation,
                        "H_hat": [float(v) for v in row.h_hat],
                        "R": [float(v) for v in row.r],
                        "Ins": row.instruction.to_dict(),
                    }
                )
                + "\n"
            )
