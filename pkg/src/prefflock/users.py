"""Simulated operator population and the ternary instruction channel.

Users come in three styles (aggressive / medium / reserved), each holding a
target preference vector per spatial situation.  Observing the flock, a user
emits a per-behavior instruction in {-1, 0, +1}: increase, keep, decrease,
with a dead-band of 0.1 in normalized space.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .world import BEHAVIORS, SITUATIONS, PreferenceVector, SituationContext

DEAD_BAND = 0.1


class PreferenceType(Enum):
    AGGRESSIVE = "aggressive"
    MEDIUM = "medium"
    RESERVED = "reserved"


TYPE_ORDER = (PreferenceType.AGGRESSIVE, PreferenceType.MEDIUM, PreferenceType.RESERVED)

# Per-type base band (lo, hi) in the FF situation, keyed by behavior.
_FF_BANDS = {
    PreferenceType.AGGRESSIVE: {
        "inner": (0.7, 1.0), "height": (0.7, 0.9), "speed": (0.8, 1.0), "safety": (0.0, 0.3),
    },
    PreferenceType.MEDIUM: {
        "inner": (0.4, 0.6), "height": (0.4, 0.6), "speed": (0.4, 0.6), "safety": (0.4, 0.6),
    },
    PreferenceType.RESERVED: {
        "inner": (0.0, 0.3), "height": (0.1, 0.3), "speed": (0.0, 0.3), "safety": (0.7, 1.0),
    },
}

# Band-endpoint shifts by situation: near a target means a slower, lower,
# more careful search; near an obstacle means more clearance and less speed.
_NEAR_TARGET_SHIFT = {"height": -0.2, "speed": -0.2}
_NEAR_OBSTACLE_SHIFT = {"safety": +0.2, "speed": -0.1}


@dataclass(frozen=True)
class Instruction:
    """Per-behavior ternary correction from a user."""

    inner: int
    height: int
    speed: int
    safety: int

    def __post_init__(self):
        for name in BEHAVIORS:
            if getattr(self, name) not in (-1, 0, 1):
                raise ValueError("invalid instruction")

    def as_array(self) -> np.ndarray:
        return np.array([self.inner, self.height, self.speed, self.safety], dtype=float)

    def is_zero(self) -> bool:
        return self.inner == 0 and self.height == 0 and self.speed == 0 and self.safety == 0

    @classmethod
    def from_array(cls, values) -> "Instruction":
        return cls(*[int(v) for v in values])

    def to_dict(self) -> dict:
        return {name: int(getattr(self, name)) for name in BEHAVIORS}

    @classmethod
    def zero(cls) -> "Instruction":
        return cls(0, 0, 0, 0)


@dataclass(frozen=True)
class UserProfile:
    """One simulated user: a preference type plus per-situation targets."""

    id: int
    ptype: PreferenceType
    targets: dict  # situation code -> PreferenceVector

    def __post_init__(self):
        missing = set(SITUATIONS) - set(self.targets)
        if missing:
            raise ValueError(f"user {self.id} missing situations {sorted(missing)}")

    def target_array(self, situation_code: str) -> np.ndarray:
        return self.targets[situation_code].as_array()


@dataclass(frozen=True)
class TypeBands:
    """Sampling intervals [lo, hi] per (type, situation, behavior)."""

    bands: dict  # PreferenceType -> situation code -> behavior -> (lo, hi)

    def __post_init__(self):
        for ptype in TYPE_ORDER:
            for situation in SITUATIONS:
                for behavior in BEHAVIORS:
                    lo, hi = self.bands[ptype][situation][behavior]
                    if not (0.0 <= lo <= hi <= 1.0):
                        raise ValueError(
                            f"bad band {ptype.value}/{situation}/{behavior}: [{lo}, {hi}]"
                        )

    def interval(self, ptype: PreferenceType, situation: str, behavior: str):
        return self.bands[ptype][situation][behavior]


def default_bands() -> TypeBands:
    """Bands encoding the ordinal structure of the three user styles."""
    bands = {}
    for ptype in TYPE_ORDER:
        per_situation = {}
        for situation in SITUATIONS:
            near_obstacle = situation[0] == "T"
            near_target = situation[1] == "T"
            per_behavior = {}
            for behavior in BEHAVIORS:
                lo, hi = _FF_BANDS[ptype][behavior]
                shift = 0.0
                if near_target:
                    shift += _NEAR_TARGET_SHIFT.get(behavior, 0.0)
                if near_obstacle:
                    shift += _NEAR_OBSTACLE_SHIFT.get(behavior, 0.0)
                lo = min(max(lo + shift, 0.0), 1.0)
                hi = min(max(hi + shift, 0.0), 1.0)
                per_behavior[behavior] = (lo, hi)
            per_situation[situation] = per_behavior
        bands[ptype] = per_situation
    return TypeBands(bands)


def generate_population(n: int, bands: TypeBands, seed: int) -> list[UserProfile]:
    """Deterministically sample ``n`` users, types assigned round-robin."""
    if n < 1:
        raise ValueError("population size must be >= 1")
    rng = np.random.default_rng(seed)
    users = []
    for uid in range(n):
        ptype = TYPE_ORDER[uid % len(TYPE_ORDER)]
        targets = {}
        for situation in SITUATIONS:
            values = []
            for behavior in BEHAVIORS:
                lo, hi = bands.interval(ptype, situation, behavior)
                values.append(float(rng.uniform(lo, hi)))
            targets[situation] = PreferenceVector(*values)
        users.append(UserProfile(id=uid, ptype=ptype, targets=targets))
    return users


def ternary_instruction(target, observed) -> np.ndarray:
    """Componentwise instruction: sign of (target - observed) outside the dead-band."""
    delta = np.asarray(target, dtype=float) - np.asarray(observed, dtype=float)
    return np.where(delta > DEAD_BAND, 1, np.where(delta < -DEAD_BAND, -1, 0))


def instruct(
    user: UserProfile, situation: SituationContext | str, observed: PreferenceVector
) -> Instruction:
    """Instruction the user gives against the observed preference values."""
    code = situation if isinstance(situation, str) else situation.code
    return Instruction.from_array(ternary_instruction(user.target_array(code), observed.as_array()))


def is_satisfied(
    user: UserProfile, situation: SituationContext | str, observed: PreferenceVector
) -> bool:
    """True when every behavior sits inside the user's dead-band."""
    return instruct(user, situation, observed).is_zero()


def save_population(path, users: list[UserProfile]) -> None:
    """Write one user per line as JSON."""
    with open(path, "w") as fh:
        for user in users:
            record = {
                "id": user.id,
                "ptype": user.ptype.value,
                "targets": {s: user.targets[s].to_dict() for s in SITUATIONS},
            }
            fh.write(json.dumps(record) + "\n")


def load_population(path) -> list[UserProfile]:
    users = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            raw = json.loads(line)
            targets = {
                s: PreferenceVector(**{b: raw["targets"][s][b] for b in BEHAVIORS})
                for s in SITUATIONS
            }
            users.append(
                UserProfile(id=int(raw["id"]), ptype=PreferenceType(raw["ptype"]), targets=targets)
            )
    return users


def save_bands(path, bands: TypeBands) -> None:
    payload = {
        ptype.value: {
            s: {b: list(bands.interval(ptype, s, b)) for b in BEHAVIORS} for s in SITUATIONS
        }
        for ptype in TYPE_ORDER
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_bands(path) -> TypeBands:
    raw = json.loads(Path(path).read_text())
    bands = {
        ptype: {
            s: {b: tuple(raw[ptype.value][s][b]) for b in BEHAVIORS} for s in SITUATIONS
        }
        for ptype in TYPE_ORDER
    }
    return TypeBands(bands)


def type_counts(users: list[UserProfile]) -> dict:
    counts = {ptype.value: 0 for ptype in TYPE_ORDER}
    for user in users:
        counts[user.ptype.value] += 1
    return counts
