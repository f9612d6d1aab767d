"""Domain types shared across the monitoring, reporting, and analysis stages.

All values are immutable after construction and safe to pass between
concurrent stages. Internal timestamps are float seconds since the stream
epoch; the epoch itself (a wall-clock datetime) lives on IntersectionGeometry
so reports can render calendar dates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, time, timedelta
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .geometry import Point2, Polygon, Segment, polygon_is_simple

SERIOUS_TTC_MAX = 1.5  # seconds; below this a conflict is serious
SLIGHT_TTC_MAX = 3.0  # seconds; above this there is no conflict


class AgentClass(Enum):
    PEDESTRIAN = "pedestrian"
    VEHICLE = "vehicle"


class RainClass(Enum):
    NONE = "none"
    LIGHT = "light"
    MODERATE = "moderate"
    HEAVY = "heavy"

    @property
    def rank(self) -> int:
        return [RainClass.NONE, RainClass.LIGHT, RainClass.MODERATE, RainClass.HEAVY].index(self)


class Severity(Enum):
    SERIOUS = "serious"
    SLIGHT = "slight"
    NONE = "none"


def severity_for_ttc(min_ttc: float) -> Severity:
    """Band a minimum TTC: <1.5 s serious, 1.5-3 s slight (closed), >3 s none."""
    if min_ttc < SERIOUS_TTC_MAX:
        return Severity.SERIOUS
    if min_ttc <= SLIGHT_TTC_MAX:
        return Severity.SLIGHT
    return Severity.NONE


@dataclass(frozen=True)
class TrackPoint:
    t: float
    pos: Point2
    frame: int

    def __post_init__(self):
        if self.t < 0 or self.frame < 0:
            raise ValueError(f"track point needs t>=0 and frame>=0, got t={self.t} frame={self.frame}")


@dataclass(frozen=True)
class Track:
    agent_id: str
    agent_class: AgentClass
    points: Tuple[TrackPoint, ...]

    def __post_init__(self):
        for a, b in zip(self.points, self.points[1:]):
            if not (b.t > a.t and b.frame > a.frame):
                raise ValueError(
                    f"track {self.agent_id}: points must strictly increase in t and frame "
                    f"({a.frame}@{a.t} -> {b.frame}@{b.t})"
                )


@dataclass(frozen=True)
class Kinematics:
    speed: float
    heading: float
    valid: bool

    def __post_init__(self):
        if self.valid and (self.speed < 0 or not 0 <= self.heading < 2 * math.pi):
            raise ValueError(f"bad kinematics speed={self.speed} heading={self.heading}")


@dataclass(frozen=True)
class AgentState:
    """Constant-velocity projection state for one agent at one instant."""

    agent_id: str
    agent_class: AgentClass
    pos: Point2
    vel: Tuple[float, float]
    t: float


@dataclass(frozen=True)
class Crosswalk:
    label: str
    polygon: Tuple[Point2, ...]
    entry_side_a: Segment
    entry_side_b: Segment


@dataclass(frozen=True)
class IntersectionGeometry:
    intersection_id: str
    location_label: str
    crosswalks: Tuple[Crosswalk, ...]
    conflict_zones: Tuple[Tuple[Point2, ...], ...]
    turn_zones: Tuple[Tuple[Point2, ...], ...]
    homography: Optional[np.ndarray] = None
    epoch: datetime = datetime(2024, 1, 1, 0, 0, 0)
    sunrise: time = time(6, 30)
    sunset: time = time(20, 30)

    def __post_init__(self):
        labels = [cw.label for cw in self.crosswalks]
        if len(set(labels)) != len(labels):
            raise ValueError(f"crosswalk labels not unique: {labels}")
        for cw in self.crosswalks:
            if not polygon_is_simple(cw.polygon):
                raise ValueError(f"crosswalk {cw.label}: polygon not simple")
        for poly in list(self.conflict_zones) + list(self.turn_zones):
            if not polygon_is_simple(poly):
                raise ValueError("zone polygon not simple")

    def crosswalk(self, label: str) -> Crosswalk:
        for cw in self.crosswalks:
            if cw.label == label:
                return cw
        raise KeyError(f"unknown crosswalk label {label!r}")

    def to_datetime(self, t: float) -> datetime:
        return self.epoch + timedelta(seconds=t)

    def is_daytime(self, t: float) -> bool:
        clock = self.to_datetime(t).time()
        return self.sunrise <= clock < self.sunset


@dataclass(frozen=True)
class PhaseWindow:
    crosswalk_label: str
    walk_start: float
    walk_end: float

    def __post_init__(self):
        if not self.walk_start < self.walk_end:
            raise ValueError(f"phase window start {self.walk_start} >= end {self.walk_end}")

    def contains(self, t: float) -> bool:
        # boundary timestamps count as inside the walk phase
        return self.walk_start <= t <= self.walk_end


@dataclass(frozen=True)
class WeatherSample:
    t: float
    temperature_c: float
    humidity_pct: float
    rain_mm_h: float
    rain_class: RainClass
    stale: bool = False

    def __post_init__(self):
        if not 0 <= self.humidity_pct <= 100:
            raise ValueError(f"humidity {self.humidity_pct} outside [0, 100]")
        if self.rain_mm_h < 0:
            raise ValueError(f"negative rain rate {self.rain_mm_h}")


@dataclass(frozen=True)
class ConflictEvent:
    ped_id: str
    veh_id: str
    t_min_ttc: float
    min_ttc: float
    severity: Severity

    def __post_init__(self):
        if self.min_ttc <= 0:
            raise ValueError(f"min_ttc must be > 0, got {self.min_ttc}")
        if self.severity is not severity_for_ttc(self.min_ttc):
            raise ValueError(f"severity {self.severity} inconsistent with min_ttc {self.min_ttc}")


class CrossDirection(Enum):
    A_TO_B = "a_to_b"
    B_TO_A = "b_to_a"


@dataclass(frozen=True)
class CrossingEvent:
    ped_id: str
    crosswalk_label: str
    t_enter: float
    t_exit: float
    direction: CrossDirection
    violation: bool
    daytime: bool

    def __post_init__(self):
        if not self.t_enter < self.t_exit:
            raise ValueError(f"crossing enter {self.t_enter} >= exit {self.t_exit}")


@dataclass(frozen=True)
class CrosswalkTally:
    crossings: int = 0
    violations: int = 0


@dataclass(frozen=True)
class HourlyAggregate:
    intersection_id: str
    hour_start: float
    hour_end: float
    weather_class: Optional[RainClass]
    pedestrian_count: int
    violation_count: int
    conflict_count: int
    per_crosswalk: Dict[str, CrosswalkTally] = field(default_factory=dict)
    day_violations: int = 0
    night_violations: int = 0
    partial: bool = False

    def __post_init__(self):
        if self.violation_count > self.pedestrian_count:
            raise ValueError(
                f"violations {self.violation_count} exceed pedestrians {self.pedestrian_count}"
            )
        if self.per_crosswalk:
            if sum(t.crossings for t in self.per_crosswalk.values()) != self.pedestrian_count:
                raise ValueError("per-crosswalk crossings do not sum to pedestrian_count")
            if sum(t.violations for t in self.per_crosswalk.values()) != self.violation_count:
                raise ValueError("per-crosswalk violations do not sum to violation_count")
        if self.day_violations + self.night_violations != self.violation_count:
            raise ValueError("day/night split does not sum to violation_count")


class ReportSource(Enum):
    TEMPLATE = "template"
    MODEL_POLISHED = "model_polished"


@dataclass(frozen=True)
class HourlyReport:
    aggregate: HourlyAggregate
    text: str
    source: ReportSource

    def __post_init__(self):
        if not self.text:
            raise ValueError("report text must be non-empty")
