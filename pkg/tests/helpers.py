"""Shared test oracles and builders."""

import math
from typing import List, Optional, Tuple

import numpy as np

from pedwatch.geometry import Point2
from pedwatch.ingest import Detection, FrameDetections
from pedwatch.model import AgentClass, AgentState


# (weather, pedestrians, violations, conflicts) for fifteen consecutive hours,
# mirroring one full day of observed activity at the default intersection
FIFTEEN_HOURS = [
    ("none", 15, 0, 0),
    ("light", 12, 3, 1),
    ("moderate", 7, 5, 2),
    ("heavy", 3, 3, 1),
    ("moderate", 3, 2, 2),
    ("light", 5, 1, 0),
    ("none", 4, 0, 0),
    ("none", 11, 2, 0),
    ("none", 9, 0, 4),
    ("none", 21, 4, 7),
    ("none", 13, 0, 0),
    ("none", 8, 0, 0),
    ("none", 2, 1, 0),
    ("none", 3, 2, 0),
    ("none", 0, 0, 0),
]


def seed_fifteen_hour_store(path):
    """Populate a report store with the fifteen-hour day above; returns geometry."""
    from pedwatch.model import CrosswalkTally, HourlyAggregate, RainClass
    from pedwatch.reporter import build_report, report_to_record
    from pedwatch.sim import default_geometry
    from pedwatch.store import ReportStore

    geometry = default_geometry()
    store = ReportStore(path)
    for i, (weather, peds, violations, conflicts) in enumerate(FIFTEEN_HOURS):
        night = i >= 12  # hours at 20:00 local and later
        agg = HourlyAggregate(
            intersection_id=geometry.intersection_id,
            hour_start=i * 3600.0,
            hour_end=(i + 1) * 3600.0,
            weather_class=RainClass(weather) if weather != "none" else RainClass.NONE,
            pedestrian_count=peds,
            violation_count=violations,
            conflict_count=conflicts,
            per_crosswalk={
                "A": CrosswalkTally(crossings=peds, violations=violations),
                "B": CrosswalkTally(crossings=0, violations=0),
            },
            day_violations=0 if night else violations,
            night_violations=violations if night else 0,
        )
        store.append(report_to_record(build_report(agg, geometry), geometry))
    return geometry


def rollout_ttc(
    ped: AgentState,
    veh: AgentState,
    radius: float,
    horizon: float = 30.0,
    dt: float = 1e-3,
) -> Optional[float]:
    """Brute-force oracle: march both agents forward at constant velocity and
    return the first grid time at which their separation is within ``radius``.
    """
    t = np.arange(0.0, horizon, dt)
    dx = (veh.pos.x - ped.pos.x) + (veh.vel[0] - ped.vel[0]) * t
    dy = (veh.pos.y - ped.pos.y) + (veh.vel[1] - ped.vel[1]) * t
    hit = np.nonzero(dx * dx + dy * dy <= radius * radius)[0]
    if hit.size == 0:
        return None
    return float(t[hit[0]])


def min_separation(ped: AgentState, veh: AgentState, horizon: float = 30.0) -> float:
    t = np.arange(0.0, horizon, 1e-3)
    dx = (veh.pos.x - ped.pos.x) + (veh.vel[0] - ped.vel[0]) * t
    dy = (veh.pos.y - ped.pos.y) + (veh.vel[1] - ped.vel[1]) * t
    return float(np.sqrt(np.min(dx * dx + dy * dy)))


def random_state_pair(rng: np.random.Generator) -> Tuple[AgentState, AgentState]:
    ped = AgentState(
        "p",
        AgentClass.PEDESTRIAN,
        Point2(float(rng.uniform(-20, 20)), float(rng.uniform(-20, 20))),
        (float(rng.uniform(-2, 2)), float(rng.uniform(-2, 2))),
        0.0,
    )
    veh = AgentState(
        "v",
        AgentClass.VEHICLE,
        Point2(float(rng.uniform(-20, 20)), float(rng.uniform(-20, 20))),
        (float(rng.uniform(-15, 15)), float(rng.uniform(-15, 15))),
        0.0,
    )
    return ped, veh


def frames_from_paths(
    paths: dict, dt: float = 0.05, classes: Optional[dict] = None
) -> List[FrameDetections]:
    """Build a frame sequence from {agent_id: [(t, x, y), ...]} sample lists."""
    classes = classes or {}
    by_frame: dict = {}
    for agent_id, samples in paths.items():
        cls = classes.get(
            agent_id,
            AgentClass.PEDESTRIAN if agent_id.startswith("p") else AgentClass.VEHICLE,
        )
        for t, x, y in samples:
            frame = round(t / dt)
            by_frame.setdefault(frame, []).append(
                Detection(agent_id, cls, Point2(x, y))
            )
    return [
        FrameDetections(frame, frame * dt, tuple(by_frame[frame]))
        for frame in sorted(by_frame)
    ]


def arc_path(
    t0: float,
    center: Tuple[float, float],
    radius: float,
    theta_start: float,
    theta_end: float,
    speed: float,
    dt: float = 0.05,
) -> List[Tuple[float, float, float]]:
    """Constant-speed circular arc sampled at dt; theta decreasing = clockwise."""
    sweep = theta_end - theta_start
    duration = abs(sweep) * radius / speed
    n = int(math.floor(duration / dt))
    out = []
    for i in range(n + 1):
        theta = theta_start + sweep * (i * dt) / duration
        out.append(
            (t0 + i * dt, center[0] + radius * math.cos(theta), center[1] + radius * math.sin(theta))
        )
    return out


def straight_path(
    t0: float,
    start: Tuple[float, float],
    vel: Tuple[float, float],
    duration: float,
    dt: float = 0.05,
) -> List[Tuple[float, float, float]]:
    n = int(round(duration / dt))
    return [
        (t0 + i * dt, start[0] + vel[0] * i * dt, start[1] + vel[1] * i * dt)
        for i in range(n + 1)
    ]
