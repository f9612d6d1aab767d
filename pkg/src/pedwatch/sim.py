"""Synthetic intersection scenario generator with exhaustive ground truth.

Generates the exact feed file formats the ingest stage consumes (track stream,
phase feed, weather feed) plus a ground-truth file, so the full pipeline is
exercised end-to-end with no test-only seams.

Kinematics are deliberately simple: pedestrians cross on straight lines,
right-turning vehicles follow a straight/arc/straight path, so every label is
analytically checkable. Injected conflicts are built by inverting the
closed-form TTC: the vehicle converges head-on with a pedestrian and breaks
off exactly when the remaining time-to-collision equals the target, so the
minimum sampled TTC equals the target on a frame boundary.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .geometry import Point2
from .ingest import classify_rain
from .model import AgentClass, Crosswalk, IntersectionGeometry, RainClass
from .monitor import DEFAULT_INTERACTION_RADIUS

HOUR = 3600.0

# margins keeping labels robust to frame quantization and interpolation
ENTRY_MARGIN = 1.0  # seconds away from walk-window edges and hour boundaries
CONFLICT_BLACKOUT_PAD = 6.0  # seconds of pedestrian quiet time around an injection

PED_SPEED_RANGE = (1.0, 1.6)  # m/s
PED_RUN_IN = 3.0  # meters of approach before/after the crosswalk

VEHICLE_SPEED = 6.0  # m/s along the right-turn path
CONFLICT_PED_SPEED = 1.2  # m/s for the conflict-actor pedestrian
TURN_RADIUS = 6.0


class ScenarioError(ValueError):
    """Infeasible or inconsistent scenario configuration."""


def default_geometry(
    intersection_id: str = "int-001",
    location_label: str = "Central Florida Blvd and N Alafaya Trail, Orlando, FL",
    epoch: datetime = datetime(2024, 6, 2, 8, 0, 0),
) -> IntersectionGeometry:
    """Two-crosswalk intersection with one conflict zone and one turn zone."""

    def rect(x0, y0, x1, y1):
        return (Point2(x0, y0), Point2(x1, y0), Point2(x1, y1), Point2(x0, y1))

    def crosswalk(label, x0, x1, y0, y1):
        return Crosswalk(
            label=label,
            polygon=rect(x0, y0, x1, y1),
            entry_side_a=(Point2(x0, y0), Point2(x1, y0)),  # south edge
            entry_side_b=(Point2(x0, y1), Point2(x1, y1)),  # north edge
        )

    return IntersectionGeometry(
        intersection_id=intersection_id,
        location_label=location_label,
        crosswalks=(crosswalk("A", 6.0, 10.0, -8.0, 8.0), crosswalk("B", -16.0, -12.0, -8.0, 8.0)),
        conflict_zones=(rect(-4.0, -2.0, 40.0, 6.0),),
        turn_zones=(rect(-8.0, -8.0, 2.0, 2.0),),
        epoch=epoch,
    )


@dataclass
class ScenarioConfig:
    duration_hours: float = 1.0
    fps: int = 20
    arrival_rate: Dict[str, float] = field(default_factory=lambda: {"A": 15.0, "B": 15.0})
    violation_prob: float = 0.2
    rain_violation_multiplier: float = 2.0
    conflicts: List[dict] = field(default_factory=list)  # [{"hour": int, "min_ttc": float}]
    weather_mm_h: Dict[int, float] = field(default_factory=dict)  # hour -> rain rate
    cycle_s: float = 90.0
    walk_s: float = 25.0
    through_vehicle_rate: float = 6.0
    seed: int = 0
    intersection_id: str = "int-001"
    location_label: str = "Central Florida Blvd and N Alafaya Trail, Orlando, FL"
    epoch: str = "2024-06-02T08:00:00"

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        data = json.loads(Path(path).read_text())
        if "weather_mm_h" in data:
            data["weather_mm_h"] = {int(k): float(v) for k, v in data["weather_mm_h"].items()}
        return cls(**data)

    def validate(self) -> None:
        if self.duration_hours < 0 or self.fps <= 0:
            raise ScenarioError("duration must be >= 0 and fps > 0")
        if not 0 <= self.violation_prob <= 1:
            raise ScenarioError(f"violation_prob {self.violation_prob} outside [0, 1]")
        if any(r < 0 for r in self.arrival_rate.values()):
            raise ScenarioError("arrival rates must be >= 0")
        for entry in self.conflicts:
            target = float(entry["min_ttc"])
            if not 0.2 <= target <= 4.0:
                raise ScenarioError(
                    f"conflict injection {entry}: target min_ttc {target} not realizable "
                    "inside the conflict zone (allowed 0.2 .. 4.0 s)"
                )
            if not 0 <= int(entry["hour"]) < math.ceil(self.duration_hours or 1):
                raise ScenarioError(f"conflict injection {entry}: hour outside scenario")


@dataclass
class SimAgent:
    agent_id: str
    agent_class: AgentClass
    t_start: float
    t_end: float
    position: Callable[[float], Tuple[float, float]]


# -- interval helpers -------------------------------------------------------


def _subtract_intervals(
    base: List[Tuple[float, float]], holes: List[Tuple[float, float]]
) -> List[Tuple[float, float]]:
    result = base
    for h0, h1 in holes:
        nxt: List[Tuple[float, float]] = []
        for a, b in result:
            if h1 <= a or h0 >= b:
                nxt.append((a, b))
                continue
            if a < h0:
                nxt.append((a, h0))
            if h1 < b:
                nxt.append((h1, b))
        result = nxt
    return [(a, b) for a, b in result if b - a > 1e-9]


def _sample_from_intervals(
    rng: np.random.Generator, intervals: List[Tuple[float, float]]
) -> Optional[float]:
    total = sum(b - a for a, b in intervals)
    if total <= 0:
        return None
    u = rng.uniform(0.0, total)
    for a, b in intervals:
        if u <= b - a:
            return a + u
        u -= b - a
    return intervals[-1][1]


# -- trajectory builders ----------------------------------------------------


def _straight_path(p0: Tuple[float, float], vel: Tuple[float, float], t0: float):
    def pos(t: float) -> Tuple[float, float]:
        dt = t - t0
        return (p0[0] + vel[0] * dt, p0[1] + vel[1] * dt)

    return pos


def _right_turn_vehicle_path(t_switch: float):
    """Piecewise path: north approach, clockwise quarter arc, straight east,
    then a reversal at ``t_switch`` (the engineered minimum-TTC instant)."""
    v = VEHICLE_SPEED
    r = TURN_RADIUS
    straight_east = 1.0  # seconds heading east before the switch
    arc_dur = (math.pi / 2.0) * r / v
    approach_dur = 14.0 / v  # from (-6, -20) to (-6, -6)
    t_arc_end = t_switch - straight_east
    t_arc_start = t_arc_end - arc_dur
    t_start = t_arc_start - approach_dur
    center = (0.0, -r)

    def pos(t: float) -> Tuple[float, float]:
        if t <= t_arc_start:
            return (-6.0, -20.0 + v * (t - t_start))
        if t <= t_arc_end:
            theta = math.pi - (v / r) * (t - t_arc_start)
            return (center[0] + r * math.cos(theta), center[1] + r * math.sin(theta))
        if t <= t_switch:
            return (0.0 + v * (t - t_arc_end), 0.0)
        return (straight_east * v - v * (t - t_switch), 0.0)

    return pos, t_start


# -- scenario ---------------------------------------------------------------


@dataclass
class GroundTruthCrossing:
    ped_id: str
    crosswalk: str
    t_enter: float
    t_exit: float
    direction: str
    violation: bool
    daytime: bool


@dataclass
class GroundTruthConflict:
    ped_id: str
    veh_id: str
    t_min_ttc: float
    min_ttc: float


@dataclass
class Scenario:
    config: ScenarioConfig
    geometry: IntersectionGeometry
    agents: List[SimAgent]
    phase_records: List[dict]
    weather_records: List[dict]
    crossings: List[GroundTruthCrossing]
    conflicts: List[GroundTruthConflict]

    @property
    def n_frames(self) -> int:
        return int(round(self.config.duration_hours * HOUR * self.config.fps))

    def iter_frames(self) -> Iterator[dict]:
        fps = self.config.fps
        agents = sorted(self.agents, key=lambda a: a.t_start)
        active: List[SimAgent] = []
        idx = 0
        for frame in range(self.n_frames):
            t = frame / fps
            while idx < len(agents) and agents[idx].t_start <= t:
                active.append(agents[idx])
                idx += 1
            active = [a for a in active if a.t_end >= t]
            detections = []
            for agent in active:
                x, y = agent.position(t)
                detections.append(
                    {"id": agent.agent_id, "class": agent.agent_class.value, "x": x, "y": y}
                )
            yield {"frame": frame, "t": t, "detections": detections}

    def expected_hourly(self) -> List[dict]:
        """Per-hour expected aggregates derived from the ground-truth labels."""
        hours = math.ceil(self.config.duration_hours)
        out = []
        for h in range(hours):
            lo, hi = h * HOUR, (h + 1) * HOUR
            crossings = [c for c in self.crossings if lo <= c.t_enter < hi]
            conflicts = [c for c in self.conflicts if lo <= c.t_min_ttc < hi]
            violations = [c for c in crossings if c.violation]
            rain = self.config.weather_mm_h.get(h, 0.0)
            out.append(
                {
                    "hour": h,
                    "pedestrians": len(crossings),
                    "violations": len(violations),
                    "conflicts": sum(1 for c in conflicts if c.min_ttc <= 3.0),
                    "weather_class": classify_rain(rain).value,
                    "per_crosswalk": {
                        cw.label: {
                            "crossings": sum(1 for c in crossings if c.crosswalk == cw.label),
                            "violations": sum(
                                1 for c in violations if c.crosswalk == cw.label
                            ),
                        }
                        for cw in self.geometry.crosswalks
                    },
                    "day_violations": sum(1 for c in violations if c.daytime),
                    "night_violations": sum(1 for c in violations if not c.daytime),
                }
            )
        return out

    def write(self, out_dir) -> Dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "tracks": out / "tracks.jsonl",
            "phases": out / "phases.jsonl",
            "weather": out / "weather.jsonl",
            "ground_truth": out / "ground_truth.jsonl",
            "geometry": out / "geometry.json",
        }
        with paths["tracks"].open("w", encoding="utf-8") as fh:
            for record in self.iter_frames():
                fh.write(json.dumps(record, separators=(",", ":")) + "\n")
        paths["phases"].write_text(
            "".join(json.dumps(r, separators=(",", ":")) + "\n" for r in self.phase_records)
        )
        paths["weather"].write_text(
            "".join(json.dumps(r, separators=(",", ":")) + "\n" for r in self.weather_records)
        )
        with paths["ground_truth"].open("w", encoding="utf-8") as fh:
            for c in self.crossings:
                fh.write(json.dumps({"kind": "crossing", **c.__dict__}, separators=(",", ":")) + "\n")
            for c in self.conflicts:
                fh.write(json.dumps({"kind": "conflict", **c.__dict__}, separators=(",", ":")) + "\n")
            for agg in self.expected_hourly():
                fh.write(json.dumps({"kind": "hourly", **agg}, separators=(",", ":")) + "\n")
        paths["geometry"].write_text(json.dumps(geometry_to_config(self.geometry), indent=2))
        return paths


def _iso(epoch: datetime, t: float) -> str:
    from datetime import timedelta

    return (epoch + timedelta(seconds=t)).isoformat()


def geometry_to_config(geometry: IntersectionGeometry) -> dict:
    def pts(poly):
        return [[p.x, p.y] for p in poly]

    return {
        "intersection_id": geometry.intersection_id,
        "location_label": geometry.location_label,
        "epoch": geometry.epoch.isoformat(),
        "sunrise": geometry.sunrise.strftime("%H:%M"),
        "sunset": geometry.sunset.strftime("%H:%M"),
        "crosswalks": [
            {
                "label": cw.label,
                "polygon": pts(cw.polygon),
                "entry_side_a": pts(cw.entry_side_a),
                "entry_side_b": pts(cw.entry_side_b),
            }
            for cw in geometry.crosswalks
        ],
        "conflict_zones": [pts(z) for z in geometry.conflict_zones],
        "turn_zones": [pts(z) for z in geometry.turn_zones],
        "homography": geometry.homography.tolist() if geometry.homography is not None else None,
    }


def geometry_from_config(data: dict) -> IntersectionGeometry:
    from datetime import time as dtime

    def pts(raw):
        return tuple(Point2(x, y) for x, y in raw)

    def seg(raw):
        (a, b) = raw
        return (Point2(*a), Point2(*b))

    sunrise = datetime.strptime(data.get("sunrise", "06:30"), "%H:%M").time()
    sunset = datetime.strptime(data.get("sunset", "20:30"), "%H:%M").time()
    return IntersectionGeometry(
        intersection_id=data["intersection_id"],
        location_label=data["location_label"],
        crosswalks=tuple(
            Crosswalk(cw["label"], pts(cw["polygon"]), seg(cw["entry_side_a"]), seg(cw["entry_side_b"]))
            for cw in data["crosswalks"]
        ),
        conflict_zones=tuple(pts(z) for z in data["conflict_zones"]),
        turn_zones=tuple(pts(z) for z in data["turn_zones"]),
        homography=np.array(data["homography"]) if data.get("homography") else None,
        epoch=datetime.fromisoformat(data["epoch"]),
        sunrise=sunrise,
        sunset=sunset,
    )


def generate_scenario(config: ScenarioConfig) -> Scenario:
    config.validate()
    geometry = default_geometry(
        intersection_id=config.intersection_id,
        location_label=config.location_label,
        epoch=datetime.fromisoformat(config.epoch),
    )
    rng = np.random.default_rng(config.seed)
    fps = config.fps
    duration = config.duration_hours * HOUR
    hours = math.ceil(config.duration_hours) if duration > 0 else 0

    # walk windows: fixed per-crosswalk offsets within the signal cycle
    offsets = {"A": 10.0, "B": 50.0}
    walk_windows: Dict[str, List[Tuple[float, float]]] = {cw.label: [] for cw in geometry.crosswalks}
    phase_records = []
    cycle = 0
    while cycle * config.cycle_s < duration:
        base = cycle * config.cycle_s
        for cw in geometry.crosswalks:
            start = base + offsets.get(cw.label, 10.0)
            end = start + config.walk_s
            if start >= duration:
                continue
            walk_windows[cw.label].append((start, end))
            phase_records.append(
                {
                    "crosswalk": cw.label,
                    "walk_start": _iso(geometry.epoch, start),
                    "walk_end": _iso(geometry.epoch, end),
                }
            )
        cycle += 1

    weather_records = []
    for h in range(hours):
        rain = config.weather_mm_h.get(h, 0.0)
        weather_records.append(
            {
                "t": _iso(geometry.epoch, h * HOUR),
                "temp_c": 24.0,
                "humidity_pct": 65.0,
                "rain_mm_h": rain,
            }
        )

    agents: List[SimAgent] = []
    crossings: List[GroundTruthCrossing] = []
    conflicts: List[GroundTruthConflict] = []

    # conflict injections first: their windows black out pedestrian scheduling
    blackouts: List[Tuple[float, float]] = []
    for i, entry in enumerate(config.conflicts):
        hour = int(entry["hour"])
        target = float(entry["min_ttc"])
        t_switch = round((hour * HOUR + HOUR / 2) * fps) / fps
        veh_id = f"cveh-{i}"
        ped_id = f"cped-{i}"
        veh_pos, veh_start = _right_turn_vehicle_path(t_switch)
        veh_end = min(t_switch + 2.0, duration - 1.0 / fps)
        gap = DEFAULT_INTERACTION_RADIUS + (VEHICLE_SPEED + CONFLICT_PED_SPEED) * target
        ped_x_at_switch = VEHICLE_SPEED * 1.0 + gap  # vehicle sits at x = 6 at the switch
        ped_start = t_switch - 3.0
        ped_end = min(t_switch + 3.0, duration - 1.0 / fps)
        ped_pos = _straight_path(
            (ped_x_at_switch + CONFLICT_PED_SPEED * 3.0, 0.0), (-CONFLICT_PED_SPEED, 0.0), ped_start
        )
        if veh_start < 0 or ped_start < 0 or t_switch >= duration:
            raise ScenarioError(f"conflict injection {entry}: episode does not fit in scenario")
        agents.append(SimAgent(veh_id, AgentClass.VEHICLE, veh_start, veh_end, veh_pos))
        agents.append(SimAgent(ped_id, AgentClass.PEDESTRIAN, ped_start, ped_end, ped_pos))
        conflicts.append(GroundTruthConflict(ped_id, veh_id, t_switch, target))
        blackouts.append((veh_start - CONFLICT_BLACKOUT_PAD, veh_end + CONFLICT_BLACKOUT_PAD))

    # pedestrian crossings per crosswalk per hour
    ped_serial = 0
    for h in range(hours):
        hour_lo, hour_hi = h * HOUR, min((h + 1) * HOUR, duration)
        rain = config.weather_mm_h.get(h, 0.0)
        p_violation = config.violation_prob
        if rain > 0:
            p_violation = min(1.0, p_violation * config.rain_violation_multiplier)
        for cw in geometry.crosswalks:
            rate = config.arrival_rate.get(cw.label, 0.0)
            span_frac = (hour_hi - hour_lo) / HOUR
            n = int(rng.poisson(rate * span_frac))
            windows = [
                (max(a, hour_lo), min(b, hour_hi))
                for a, b in walk_windows[cw.label]
                if b > hour_lo and a < hour_hi
            ]
            # crossing duration bounds the occupancy interval used for blackouts
            x0, x1 = cw.polygon[0].x, cw.polygon[1].x
            y0, y1 = cw.polygon[0].y, cw.polygon[2].y
            height = y1 - y0
            for _ in range(n):
                violator = bool(rng.random() < p_violation)
                speed = float(rng.uniform(*PED_SPEED_RANGE))
                lane_x = float(rng.uniform(x0 + 0.5, x1 - 0.5))
                a_to_b = bool(rng.random() < 0.5)
                duration_cross = height / speed
                run_in = PED_RUN_IN / speed
                base = [(hour_lo + ENTRY_MARGIN, hour_hi - ENTRY_MARGIN - duration_cross - run_in)]
                if violator:
                    candidate = _subtract_intervals(
                        base,
                        [(a - ENTRY_MARGIN, b + ENTRY_MARGIN) for a, b in walk_windows[cw.label]],
                    )
                else:
                    shrunk = [
                        (a + ENTRY_MARGIN, b - ENTRY_MARGIN)
                        for a, b in windows
                        if b - a > 2 * ENTRY_MARGIN
                    ]
                    candidate = _subtract_intervals(shrunk, [])
                    candidate = [
                        (max(a, base[0][0]), min(b, base[0][1])) for a, b in candidate
                    ]
                    candidate = [(a, b) for a, b in candidate if b > a]
                # keep pedestrians away from injected-conflict episodes
                occupancy_pad = run_in + duration_cross + run_in
                holes = [(a - occupancy_pad, b + run_in) for a, b in blackouts]
                candidate = _subtract_intervals(candidate, holes)
                t_enter = _sample_from_intervals(rng, candidate)
                if t_enter is None:
                    continue
                entry_y, exit_y = (y0, y1) if a_to_b else (y1, y0)
                direction = 1.0 if a_to_b else -1.0
                t_start = t_enter - run_in
                ped_id = f"ped-{ped_serial}"
                ped_serial += 1
                pos = _straight_path(
                    (lane_x, entry_y - direction * PED_RUN_IN), (0.0, direction * speed), t_start
                )
                t_exit = t_enter + duration_cross
                t_end = t_exit + run_in
                agents.append(SimAgent(ped_id, AgentClass.PEDESTRIAN, t_start, t_end, pos))
                crossings.append(
                    GroundTruthCrossing(
                        ped_id=ped_id,
                        crosswalk=cw.label,
                        t_enter=t_enter,
                        t_exit=t_exit,
                        direction="a_to_b" if a_to_b else "b_to_a",
                        violation=violator,
                        daytime=geometry.is_daytime(t_enter),
                    )
                )

    # straight-through vehicles exercise the non-right-turn path
    veh_serial = 0
    for h in range(hours):
        hour_lo, hour_hi = h * HOUR, min((h + 1) * HOUR, duration)
        n = int(rng.poisson(config.through_vehicle_rate * (hour_hi - hour_lo) / HOUR))
        for _ in range(n):
            t0 = float(rng.uniform(hour_lo, max(hour_lo, hour_hi - 10.0)))
            vid = f"veh-{veh_serial}"
            veh_serial += 1
            pos = _straight_path((40.0, 4.0), (-8.0, 0.0), t0)
            agents.append(SimAgent(vid, AgentClass.VEHICLE, t0, min(t0 + 7.5, duration), pos))

    return Scenario(
        config=config,
        geometry=geometry,
        agents=agents,
        phase_records=phase_records,
        weather_records=weather_records,
        crossings=sorted(crossings, key=lambda c: c.t_enter),
        conflicts=sorted(conflicts, key=lambda c: c.t_min_ttc),
    )


def inject_occlusion(
    frames: Sequence[dict], drop_prob: float, burst_len: float, seed: int
) -> List[dict]:
    """Remove per-agent detection runs in bursts of geometric mean length.

    A two-state Markov chain per agent gives a stationary dropped fraction of
    ``drop_prob`` with mean burst length ``burst_len``. Ground truth is
    untouched; frame records stay (possibly with empty detection lists).
    """
    if not 0 <= drop_prob < 1:
        raise ValueError(f"drop_prob {drop_prob} outside [0, 1)")
    if drop_prob == 0:
        return [dict(f) for f in frames]
    rng = np.random.default_rng(seed)
    p_exit = 1.0 / burst_len
    p_enter = drop_prob * p_exit / (1.0 - drop_prob)
    occluded: Dict[str, bool] = {}
    out = []
    for frame in frames:
        kept = []
        for det in frame["detections"]:
            agent_id = det["id"]
            if agent_id not in occluded:
                occluded[agent_id] = bool(rng.random() < drop_prob)  # stationary start
            elif occluded[agent_id]:
                if rng.random() < p_exit:
                    occluded[agent_id] = False
            else:
                if rng.random() < p_enter:
                    occluded[agent_id] = True
            if not occluded[agent_id]:
                kept.append(det)
        out.append({**frame, "detections": kept})
    return out


def replay(frames, fps: int, speed_factor: Optional[float] = None) -> Iterator[dict]:
    """Deliver frame records paced at fps * speed_factor; None is unthrottled."""
    import time as time_mod

    if speed_factor is None:
        yield from frames
        return
    if speed_factor <= 0:
        raise ValueError(f"speed_factor must be positive, got {speed_factor}")
    start = time_mod.monotonic()
    for i, frame in enumerate(frames):
        due = start + (i / fps) / speed_factor
        delay = due - time_mod.monotonic()
        if delay > 0:
            time_mod.sleep(delay)
        yield frame
