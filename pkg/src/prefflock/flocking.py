"""Preference-modulated flocking controller.

Each robot's desired velocity is the sum of six terms: goal seeking,
short-range repulsion, long-range attraction, obstacle avoidance, altitude
regulation and velocity alignment.  The repulsion/attraction/avoidance terms
are linear half-springs that activate only past a cutoff distance taken from
the current preferred behavior values.  The summed velocity is capped at the
preferred speed and positions advance by explicit Euler integration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .world import Arena, MotionStatus, PreferenceVector, RobotState, denormalize

_FALLBACK_DIRECTION = np.array([1.0, 0.0, 0.0])  # coincident-robot tie-break


@dataclass(frozen=True)
class FlockParams:
    """Controller gains and integration settings."""

    gain_flock: float = 1.0
    gain_rep: float = 0.6
    gain_att: float = 0.15
    gain_saf: float = 1.2
    gain_hei: float = 0.8
    gain_ali: float = 0.3
    attraction_radius_factor: float = 1.5
    dt: float = 0.1
    v_max_hard: float = 10.0

    def __post_init__(self):
        gains = (self.gain_flock, self.gain_rep, self.gain_att,
                 self.gain_saf, self.gain_hei, self.gain_ali)
        if any(g < 0 for g in gains):
            raise ValueError("gains must be nonnegative")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.attraction_radius_factor <= 1:
            raise ValueError("attraction_radius_factor must exceed 1")

    @classmethod
    def from_dict(cls, raw: dict | None) -> "FlockParams":
        return cls(**(raw or {}))


@dataclass(frozen=True)
class VelocityTerms:
    """The six velocity contributions for one robot, m/s."""

    flock: np.ndarray
    rep: np.ndarray
    att: np.ndarray
    saf: np.ndarray
    hei: np.ndarray
    ali: np.ndarray

    def total(self) -> np.ndarray:
        return self.flock + self.rep + self.att + self.saf + self.hei + self.ali


def compute_velocity_terms(
    i: int,
    robots: list[RobotState],
    waypoint,
    pref_physical: MotionStatus,
    arena: Arena,
    params: FlockParams,
) -> VelocityTerms:
    """Evaluate the six velocity terms for robot ``i``.

    ``pref_physical`` carries the commanded behavior values in physical units:
    inner = repulsion cutoff r0, safety = obstacle clearance cutoff s0,
    height = commanded altitude, speed = goal-seeking magnitude.
    """
    me = robots[i]
    pos = me.position
    r0 = pref_physical.inner
    s0 = pref_physical.safety
    r_att = params.attraction_radius_factor * r0

    to_goal = np.asarray(waypoint, dtype=float) - pos
    goal_dist = np.linalg.norm(to_goal)
    if goal_dist > 0:
        flock = params.gain_flock * pref_physical.speed * to_goal / goal_dist
    else:
        flock = np.zeros(3)

    rep = np.zeros(3)
    att = np.zeros(3)
    ali = np.zeros(3)
    for j, other in enumerate(robots):
        if j == i:
            continue
        offset = pos - other.position
        d = float(np.linalg.norm(offset))
        if d < r0:
            if d > 0:
                direction = offset / d
            else:
                direction = _FALLBACK_DIRECTION if i < j else -_FALLBACK_DIRECTION
            rep += params.gain_rep * (r0 - d) * direction
        elif d > r_att:
            att += params.gain_att * (d - r_att) * (-offset / d)
        ali += other.velocity
    n_others = len(robots) - 1
    if n_others > 0:
        ali = params.gain_ali * (ali / n_others - me.velocity)

    saf = np.zeros(3)
    if arena.obstacles:
        nearest = min(arena.obstacles, key=lambda ob: ob.surface_distance(pos))
        d = nearest.surface_distance(pos)
        if d < s0:
            saf = params.gain_saf * (s0 - d) * nearest.outward_normal(pos)

    hei = np.array([0.0, 0.0, params.gain_hei * (pref_physical.height - pos[2])])

    return VelocityTerms(flock=flock, rep=rep, att=att, saf=saf, hei=hei, ali=ali)


def apply_speed_limit(v, h_speed: float) -> np.ndarray:
    """Rescale ``v`` onto the preferred-speed sphere only when it exceeds it."""
    v = np.asarray(v, dtype=float)
    speed = float(np.linalg.norm(v))
    if speed > h_speed:
        return v * (h_speed / speed)
    return v


def step(
    robots: list[RobotState],
    waypoint,
    pref: PreferenceVector,
    arena: Arena,
    params: FlockParams,
) -> list[RobotState]:
    """Advance every robot by one Euler step under the commanded preference."""
    pref_physical = denormalize(pref)
    h_speed = min(pref_physical.speed, params.v_max_hard)
    out = []
    for i in range(len(robots)):
        terms = compute_velocity_terms(i, robots, waypoint, pref_physical, arena, params)
        v = apply_speed_limit(terms.total(), h_speed)
        position = arena.clamp_position(robots[i].position + v * params.dt)
        out.append(RobotState(position=position, velocity=v))
    return out
