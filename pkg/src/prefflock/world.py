"""Arena, robots and the preference/status value spaces.

The flock's behavior is parameterized by four behaviors {inner, height,
speed, safety}.  Measured values live in physical units (MotionStatus);
commanded/learned values live in normalized [0, 1] space (PreferenceVector).
The two are linked by a fixed affine map per behavior:

    inner   [2, 5] m      min pairwise robot distance
    height  [0, 30] m     mean altitude
    speed   [3, 8] m/s    mean speed magnitude
    safety  [0, 3] m      min robot-to-obstacle surface distance
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

BEHAVIORS = ("inner", "height", "speed", "safety")

# Physical (lo, hi) per behavior, in the order of BEHAVIORS.
PHYSICAL_RANGES = np.array([[2.0, 5.0], [0.0, 30.0], [3.0, 8.0], [0.0, 3.0]])

SITUATIONS = ("FF", "TF", "FT", "TT")

# Default near/far thresholds for situation classification, meters.
DEFAULT_NEAR_OBSTACLE_M = 25.0
DEFAULT_NEAR_TARGET_M = 25.0


@dataclass(frozen=True)
class Obstacle:
    """Axis-aligned box obstacle."""

    center: np.ndarray  # (3,) meters
    half_extents: np.ndarray  # (3,) meters, all > 0

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "half_extents", np.asarray(self.half_extents, dtype=float))
        if not np.all(self.half_extents > 0):
            raise ValueError("obstacle half_extents must be positive")

    def surface_distance(self, point) -> float:
        """Euclidean distance from a 3-D point to the box surface (0 inside)."""
        p = np.asarray(point, dtype=float)
        excess = np.maximum(np.abs(p - self.center) - self.half_extents, 0.0)
        return float(np.linalg.norm(excess))

    def footprint_distance(self, point_xy) -> float:
        """Distance from a ground-plane point to the box's xy footprint."""
        p = np.asarray(point_xy, dtype=float)
        excess = np.maximum(np.abs(p - self.center[:2]) - self.half_extents[:2], 0.0)
        return float(np.linalg.norm(excess))

    def outward_normal(self, point) -> np.ndarray:
        """Unit normal pointing from the box surface toward ``point``.

        Inside the box the normal points along the axis of least penetration
        (lowest-index axis on ties) so the direction is always deterministic.
        """
        p = np.asarray(point, dtype=float)
        delta = p - self.center
        excess = np.abs(delta) - self.half_extents
        if np.any(excess > 0):
            outside = np.where(excess > 0, np.sign(delta) * excess, 0.0)
            return outside / np.linalg.norm(outside)
        axis = int(np.argmin(-excess))  # least penetration depth
        normal = np.zeros(3)
        normal[axis] = 1.0 if delta[axis] >= 0 else -1.0
        return normal


@dataclass(frozen=True)
class TargetZone:
    """Circular ground area of interest (victim / inspection zone)."""

    center: np.ndarray  # (2,) meters
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.radius <= 0:
            raise ValueError("target radius must be positive")


@dataclass(frozen=True)
class Arena:
    """Bounded workspace with box obstacles and ground targets."""

    width: float
    depth: float
    max_altitude: float
    obstacles: tuple[Obstacle, ...] = ()
    targets: tuple[TargetZone, ...] = ()

    def __post_init__(self):
        if self.width <= 0 or self.depth <= 0 or self.max_altitude <= 0:
            raise ValueError("arena dimensions must be positive")
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        object.__setattr__(self, "targets", tuple(self.targets))
        for ob in self.obstacles:
            lo = ob.center[:2] - ob.half_extents[:2]
            hi = ob.center[:2] + ob.half_extents[:2]
            if lo[0] < 0 or lo[1] < 0 or hi[0] > self.width or hi[1] > self.depth:
                raise ValueError("obstacle footprint outside arena bounds")
        for tz in self.targets:
            if not (0 <= tz.center[0] <= self.width and 0 <= tz.center[1] <= self.depth):
                raise ValueError("target center outside arena bounds")

    def clamp_position(self, position) -> np.ndarray:
        p = np.asarray(position, dtype=float)
        lo = np.array([0.0, 0.0, 0.0])
        hi = np.array([self.width, self.depth, self.max_altitude])
        return np.minimum(np.maximum(p, lo), hi)


@dataclass(frozen=True)
class RobotState:
    """Kinematic state of one robot."""

    position: np.ndarray  # (3,) meters
    velocity: np.ndarray  # (3,) m/s

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float))


@dataclass(frozen=True)
class MotionStatus:
    """Measured flock statistics in physical units."""

    inner: float
    height: float
    speed: float
    safety: float

    def as_array(self) -> np.ndarray:
        return np.array([self.inner, self.height, self.speed, self.safety])


@dataclass(frozen=True)
class PreferenceVector:
    """Normalized behavior values, each in [0, 1]."""

    inner: float
    height: float
    speed: float
    safety: float

    def __post_init__(self):
        for name in BEHAVIORS:
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"preference component {name}={v} outside [0, 1]")

    def as_array(self) -> np.ndarray:
        return np.array([self.inner, self.height, self.speed, self.safety])

    @classmethod
    def from_array(cls, values) -> "PreferenceVector":
        v = np.asarray(values, dtype=float)
        return cls(float(v[0]), float(v[1]), float(v[2]), float(v[3]))

    def to_dict(self) -> dict:
        return {name: float(getattr(self, name)) for name in BEHAVIORS}


@dataclass(frozen=True)
class SituationContext:
    """Spatial context of the flock relative to obstacles and targets."""

    near_obstacle: bool
    near_target: bool
    dist_obstacle: float
    dist_target: float

    @property
    def code(self) -> str:
        """Two-letter situation code; first letter = obstacles, second = target."""
        return ("T" if self.near_obstacle else "F") + ("T" if self.near_target else "F")


def classify_situation(
    flock_centroid,
    arena: Arena,
    near_obstacle_m: float = DEFAULT_NEAR_OBSTACLE_M,
    near_target_m: float = DEFAULT_NEAR_TARGET_M,
) -> SituationContext:
    """Classify the centroid as near/far from obstacles and targets.

    Obstacle distance is to the nearest box surface (3-D); target distance is
    to the nearest target center in the ground plane.  Empty lists give +inf.
    """
    c = np.asarray(flock_centroid, dtype=float)
    dist_obstacle = min((ob.surface_distance(c) for ob in arena.obstacles), default=math.inf)
    dist_target = min(
        (float(np.linalg.norm(c[:2] - tz.center)) for tz in arena.targets), default=math.inf
    )
    return SituationContext(
        near_obstacle=dist_obstacle <= near_obstacle_m,
        near_target=dist_target <= near_target_m,
        dist_obstacle=dist_obstacle,
        dist_target=dist_target,
    )


def normalize(status: MotionStatus) -> PreferenceVector:
    """Map physical measurements onto [0, 1], clamping out-of-range values."""
    raw = status.as_array()
    lo, hi = PHYSICAL_RANGES[:, 0], PHYSICAL_RANGES[:, 1]
    clamped = np.minimum(np.maximum(raw, lo), hi)
    return PreferenceVector.from_array((clamped - lo) / (hi - lo))


def denormalize(pref: PreferenceVector) -> MotionStatus:
    """Exact inverse of :func:`normalize` on in-range values."""
    lo, hi = PHYSICAL_RANGES[:, 0], PHYSICAL_RANGES[:, 1]
    phys = lo + pref.as_array() * (hi - lo)
    return MotionStatus(*[float(v) for v in phys])


def measure_motion_status(robots: list[RobotState], arena: Arena) -> MotionStatus:
    """Measure (inner, height, speed, safety) from the current flock.

    Requires at least two robots.  With no obstacles, safety reports the top
    of its physical range so normalization stays defined.
    """
    if len(robots) < 2:
        raise ValueError("insufficient flock")
    positions = np.stack([r.position for r in robots])
    velocities = np.stack([r.velocity for r in robots])
    diffs = positions[:, None, :] - positions[None, :, :]
    dists = np.linalg.norm(diffs, axis=-1)
    iu = np.triu_indices(len(robots), k=1)
    inner = float(dists[iu].min())
    height = float(positions[:, 2].mean())
    speed = float(np.linalg.norm(velocities, axis=1).mean())
    if arena.obstacles:
        safety = min(ob.surface_distance(p) for p in positions for ob in arena.obstacles)
    else:
        safety = float(PHYSICAL_RANGES[3, 1])
    return MotionStatus(inner=inner, height=height, speed=speed, safety=safety)


def flock_centroid(robots: list[RobotState]) -> np.ndarray:
    return np.stack([r.position for r in robots]).mean(axis=0)


def load_scenario(path) -> tuple[Arena, dict]:
    """Load an arena plus any extra sections (e.g. flock_params) from JSON."""
    with open(path) as fh:
        raw = json.load(fh)
    return arena_from_dict(raw), raw


def arena_from_dict(raw: dict) -> Arena:
    obstacles = tuple(
        Obstacle(center=ob["center"], half_extents=ob["half_extents"])
        for ob in raw.get("obstacles", ())
    )
    targets = tuple(
        TargetZone(center=tz["center"], radius=tz["radius"]) for tz in raw.get("targets", ())
    )
    return Arena(
        width=float(raw["width"]),
        depth=float(raw["depth"]),
        max_altitude=float(raw["max_altitude"]),
        obstacles=obstacles,
        targets=targets,
    )


def default_scenario() -> dict:
    """Built-in 400 m x 400 m search site with building obstacles.

    Obstacles are laid out so a flock crossing from the south-west corner to
    the north-east target passes through all four situations (the last
    obstacle sits next to the target to create TT).
    """
    return {
        "width": 400.0,
        "depth": 400.0,
        "max_altitude": 50.0,
        "obstacles": [
            {"center": [120.0, 100.0, 15.0], "half_extents": [15.0, 10.0, 15.0]},
            {"center": [200.0, 210.0, 12.0], "half_extents": [12.0, 18.0, 12.0]},
            {"center": [150.0, 260.0, 10.0], "half_extents": [10.0, 10.0, 10.0]},
            {"center": [300.0, 180.0, 14.0], "half_extents": [14.0, 12.0, 14.0]},
            {"center": [330.0, 325.0, 12.0], "half_extents": [10.0, 10.0, 12.0]},
        ],
        "targets": [{"center": [350.0, 350.0], "radius": 20.0}],
    }


def default_arena() -> Arena:
    return arena_from_dict(default_scenario())


def write_scenario(path, scenario: dict) -> None:
    Path(path).write_text(json.dumps(scenario, indent=2) + "\n")
