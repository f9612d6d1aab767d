"""Monitoring stage: trajectory assembly, kinematics, right-turn
classification, pedestrian-vehicle conflict detection via time-to-collision,
and crossing detection with violation verdicts.

The stage is strictly sequential per intersection stream; frame order is
load-bearing. Emitted events are immutable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from .geometry import (
    Point2,
    normalize_heading,
    point_in_polygon,
    point_segment_distance,
    signed_heading_delta,
)
from .ingest import FrameDetections
from .model import (
    AgentClass,
    AgentState,
    ConflictEvent,
    CrossDirection,
    CrossingEvent,
    Crosswalk,
    IntersectionGeometry,
    Kinematics,
    PhaseWindow,
    Track,
    TrackPoint,
    severity_for_ttc,
)

DEFAULT_SMOOTHING_WINDOW = 5  # points in the velocity fit
DEFAULT_RETIREMENT_GAP = 30  # frames without a detection before a track retires
DEFAULT_CLOSE_STREAK = 20  # consecutive no-conflict frames that close an episode
DEFAULT_INTERACTION_RADIUS = 1.3  # meters: 0.3 pedestrian + 1.0 vehicle footprint
RIGHT_TURN_THRESHOLD = -math.pi / 3  # cumulative clockwise heading change
EPISODE_QUIET_TTC = 3.0  # seconds; TTC above this counts toward episode closing

# Contact (distance already within the interaction radius) is reported as a
# vanishingly small positive TTC so the serious band applies.
CONTACT_TTC = 1e-9


def compute_ttc(
    ped: AgentState, veh: AgentState, radius: float = DEFAULT_INTERACTION_RADIUS
) -> Optional[float]:
    """Time until the two constant-velocity agents come within ``radius``.

    Solves |dp + dv*t| = radius for the smallest positive t. Returns None when
    the extrapolated paths never close to the radius.
    """
    if radius <= 0:
        raise ValueError(f"interaction radius must be positive, got {radius}")
    dx = veh.pos.x - ped.pos.x
    dy = veh.pos.y - ped.pos.y
    dvx = veh.vel[0] - ped.vel[0]
    dvy = veh.vel[1] - ped.vel[1]
    c = dx * dx + dy * dy - radius * radius
    if c <= 0:
        return CONTACT_TTC
    a = dvx * dvx + dvy * dvy
    b = 2.0 * (dx * dvx + dy * dvy)
    if a == 0.0:
        return None
    disc = b * b - 4.0 * a * c
    if disc < 0:
        return None
    sqrt_disc = math.sqrt(disc)
    t1 = (-b - sqrt_disc) / (2.0 * a)
    if t1 > 0:
        return t1
    t2 = (-b + sqrt_disc) / (2.0 * a)
    if t2 > 0:
        return CONTACT_TTC
    return None


def fit_velocity(
    times: Sequence[float], xs: Sequence[float], ys: Sequence[float]
) -> Tuple[float, float]:
    """Least-squares linear velocity over the given samples (>=2 points)."""
    t = np.asarray(times, dtype=float)
    tc = t - t.mean()
    denom = float((tc * tc).sum())
    if denom == 0.0:
        return (0.0, 0.0)
    vx = float((tc * (np.asarray(xs, dtype=float) - np.mean(xs))).sum() / denom)
    vy = float((tc * (np.asarray(ys, dtype=float) - np.mean(ys))).sum() / denom)
    return (vx, vy)


def estimate_kinematics(
    track: Track, t: float, window: int = DEFAULT_SMOOTHING_WINDOW
) -> Tuple[Kinematics, Optional[AgentState]]:
    """Speed/heading from a least-squares velocity fit over the last ``window``
    points at or before ``t``. Returns an invalid Kinematics (no state) when
    fewer than two points are available.
    """
    points = [p for p in track.points if p.t <= t]
    if len(points) < 2:
        return Kinematics(0.0, 0.0, valid=False), None
    tail = points[-window:]
    vx, vy = fit_velocity(
        [p.t for p in tail], [p.pos.x for p in tail], [p.pos.y for p in tail]
    )
    speed = math.hypot(vx, vy)
    heading = normalize_heading(vx, vy) if speed > 1e-12 else 0.0
    last = points[-1]
    state = AgentState(track.agent_id, track.agent_class, last.pos, (vx, vy), last.t)
    return Kinematics(speed, heading, valid=True), state


def cumulative_turn_angle(
    points: Sequence[TrackPoint], turn_zones: Sequence[Sequence[Point2]]
) -> float:
    """Sum of signed per-step heading deltas accumulated while inside a turn zone."""
    total = 0.0
    prev_heading: Optional[float] = None
    for a, b in zip(points, points[1:]):
        dx, dy = b.pos.x - a.pos.x, b.pos.y - a.pos.y
        if dx == 0.0 and dy == 0.0:
            continue
        heading = normalize_heading(dx, dy)
        if prev_heading is not None and any(point_in_polygon(b.pos, z) for z in turn_zones):
            total += signed_heading_delta(prev_heading, heading)
        prev_heading = heading
    return total


def classify_turn(
    track: Track, geometry: IntersectionGeometry, window: int = DEFAULT_SMOOTHING_WINDOW
) -> str:
    """Classify a vehicle track as "right_turn" or "other".

    Right turns accumulate at least 60 degrees of clockwise heading change
    while inside a turn zone (+x east / +y north, clockwise negative).
    """
    if track.agent_class is not AgentClass.VEHICLE:
        raise ValueError(
            f"turn classification applies to vehicle tracks, got {track.agent_class}"
        )
    in_zone = sum(
        1 for p in track.points if any(point_in_polygon(p.pos, z) for z in geometry.turn_zones)
    )
    if in_zone < window:
        return "other"
    angle = cumulative_turn_angle(track.points, geometry.turn_zones)
    return "right_turn" if angle <= RIGHT_TURN_THRESHOLD else "other"


# ---------------------------------------------------------------------------
# Streaming building blocks


class LiveTrack:
    """Mutable in-flight track; snapshots freeze into the shared Track type."""

    __slots__ = ("agent_id", "agent_class", "times", "xs", "ys", "frames", "last_frame", "reacquired")

    def __init__(self, agent_id: str, agent_class: AgentClass, reacquired: bool = False):
        self.agent_id = agent_id
        self.agent_class = agent_class
        self.times: List[float] = []
        self.xs: List[float] = []
        self.ys: List[float] = []
        self.frames: List[int] = []
        self.last_frame = -1
        self.reacquired = reacquired

    def append(self, t: float, pos: Point2, frame: int) -> None:
        if self.frames and (frame <= self.frames[-1] or t <= self.times[-1]):
            raise ValueError(f"track {self.agent_id}: non-increasing frame/time at frame {frame}")
        self.times.append(t)
        self.xs.append(pos.x)
        self.ys.append(pos.y)
        self.frames.append(frame)
        self.last_frame = frame

    def __len__(self) -> int:
        return len(self.times)

    def last_pos(self) -> Point2:
        return Point2(self.xs[-1], self.ys[-1])

    def state(self, window: int = DEFAULT_SMOOTHING_WINDOW) -> Optional[AgentState]:
        if len(self.times) < 2:
            return None
        lo = max(0, len(self.times) - window)
        vx, vy = fit_velocity(self.times[lo:], self.xs[lo:], self.ys[lo:])
        return AgentState(self.agent_id, self.agent_class, self.last_pos(), (vx, vy), self.times[-1])

    def snapshot(self) -> Track:
        points = tuple(
            TrackPoint(t, Point2(x, y), f)
            for t, x, y, f in zip(self.times, self.xs, self.ys, self.frames)
        )
        return Track(self.agent_id, self.agent_class, points)


class TrackAssembler:
    """Groups per-frame detections into live tracks with gap-based retirement."""

    def __init__(self, retirement_gap: int = DEFAULT_RETIREMENT_GAP):
        self.retirement_gap = retirement_gap
        self.live: Dict[str, LiveTrack] = {}
        self.retired: List[LiveTrack] = []
        self._seen_ids: Set[str] = set()

    def process(self, fd: FrameDetections) -> List[LiveTrack]:
        """Append detections; returns tracks retired by this frame."""
        ids = [d.agent_id for d in fd.detections]
        if len(set(ids)) != len(ids):
            raise ValueError(f"frame {fd.frame}: duplicate agent ids {ids}")
        newly_retired = []
        for agent_id, track in list(self.live.items()):
            if fd.frame - track.last_frame > self.retirement_gap:
                newly_retired.append(self.live.pop(agent_id))
        self.retired.extend(newly_retired)
        for det in fd.detections:
            track = self.live.get(det.agent_id)
            if track is None:
                track = LiveTrack(
                    det.agent_id, det.agent_class, reacquired=det.agent_id in self._seen_ids
                )
                self.live[det.agent_id] = track
                self._seen_ids.add(det.agent_id)
            track.append(fd.t, det.pos, fd.frame)
        return newly_retired

    def finish(self) -> List[LiveTrack]:
        remaining = list(self.live.values())
        self.retired.extend(remaining)
        self.live.clear()
        return remaining


def assemble_trajectories(
    frames: Iterable[FrameDetections], retirement_gap: int = DEFAULT_RETIREMENT_GAP
) -> List[Track]:
    """Batch trajectory assembly over an ordered frame sequence."""
    assembler = TrackAssembler(retirement_gap)
    for fd in frames:
        assembler.process(fd)
    assembler.finish()
    return [t.snapshot() for t in assembler.retired]


def _boundary_crossing(
    p_out: Point2, t_out: float, p_in: Point2, t_in: float, polygon: Sequence[Point2]
) -> Tuple[Point2, float]:
    """Bisect between an outside and an inside sample for the polygon boundary
    crossing point and its interpolated time."""
    lo, hi = 0.0, 1.0  # lo fraction is outside, hi inside

    def at(s: float) -> Point2:
        return Point2(p_out.x + s * (p_in.x - p_out.x), p_out.y + s * (p_in.y - p_out.y))

    for _ in range(30):
        mid = 0.5 * (lo + hi)
        if point_in_polygon(at(mid), polygon):
            hi = mid
        else:
            lo = mid
    return at(hi), t_out + hi * (t_in - t_out)


def _nearest_side(pos: Point2, crosswalk: Crosswalk) -> str:
    da = point_segment_distance(pos, crosswalk.entry_side_a)
    db = point_segment_distance(pos, crosswalk.entry_side_b)
    return "a" if da <= db else "b"


class _CrossingState:
    __slots__ = ("inside", "entry_t", "entry_side")

    def __init__(self):
        self.inside = False
        self.entry_t = 0.0
        self.entry_side = "a"


class CrossingTracker:
    """Per-pedestrian crossing state machine over one intersection geometry.

    A crossing is emitted when a track enters a crosswalk through one entry
    side and exits through the other; same-side turn-backs emit nothing. The
    violation verdict is anchored on the entry time (the pedestrian's decision
    point), with walk-window boundaries counting as safe.
    """

    def __init__(self, geometry: IntersectionGeometry, phases: Sequence[PhaseWindow]):
        self.geometry = geometry
        self._phases_by_label: Dict[str, List[PhaseWindow]] = {}
        for w in phases:
            self._phases_by_label.setdefault(w.crosswalk_label, []).append(w)
        self._states: Dict[str, Dict[str, _CrossingState]] = {}
        self._prev_sample: Dict[str, Tuple[Point2, float]] = {}

    def is_violation(self, label: str, t_enter: float) -> bool:
        return not any(w.contains(t_enter) for w in self._phases_by_label.get(label, []))

    def observe(self, ped_id: str, pos: Point2, t: float) -> List[CrossingEvent]:
        events: List[CrossingEvent] = []
        states = self._states.setdefault(ped_id, {})
        prev = self._prev_sample.get(ped_id)
        for cw in self.geometry.crosswalks:
            state = states.setdefault(cw.label, _CrossingState())
            inside = point_in_polygon(pos, cw.polygon)
            if inside and not state.inside:
                if prev is not None:
                    entry_pos, entry_t = _boundary_crossing(prev[0], prev[1], pos, t, cw.polygon)
                else:
                    # track starts inside the crosswalk (e.g. occluded approach)
                    entry_pos, entry_t = pos, t
                state.inside = True
                state.entry_t = entry_t
                state.entry_side = _nearest_side(entry_pos, cw)
            elif not inside and state.inside:
                assert prev is not None
                exit_pos, exit_t = _boundary_crossing(pos, t, prev[0], prev[1], cw.polygon)
                exit_side = _nearest_side(exit_pos, cw)
                if exit_side != state.entry_side and exit_t > state.entry_t:
                    direction = (
                        CrossDirection.A_TO_B if state.entry_side == "a" else CrossDirection.B_TO_A
                    )
                    events.append(
                        CrossingEvent(
                            ped_id=ped_id,
                            crosswalk_label=cw.label,
                            t_enter=state.entry_t,
                            t_exit=exit_t,
                            direction=direction,
                            violation=self.is_violation(cw.label, state.entry_t),
                            daytime=self.geometry.is_daytime(state.entry_t),
                        )
                    )
                states[cw.label] = _CrossingState()
        self._prev_sample[ped_id] = (pos, t)
        return events

    def forget(self, ped_id: str) -> None:
        self._states.pop(ped_id, None)
        self._prev_sample.pop(ped_id, None)


def detect_crossings(
    tracks: Iterable[Track],
    geometry: IntersectionGeometry,
    phases: Sequence[PhaseWindow],
) -> List[CrossingEvent]:
    """Batch crossing detection over completed pedestrian tracks."""
    tracker = CrossingTracker(geometry, phases)
    events: List[CrossingEvent] = []
    for track in tracks:
        if track.agent_class is not AgentClass.PEDESTRIAN:
            continue
        tracker.forget(track.agent_id)
        for p in track.points:
            events.extend(tracker.observe(track.agent_id, p.pos, p.t))
    return events


class _TurnState:
    __slots__ = ("prev_pos", "prev_heading", "cumulative", "zone_points", "is_right_turn")

    def __init__(self):
        self.prev_pos: Optional[Point2] = None
        self.prev_heading: Optional[float] = None
        self.cumulative = 0.0
        self.zone_points = 0
        self.is_right_turn = False


class _Episode:
    __slots__ = ("ped_id", "veh_id", "t_open", "min_ttc", "t_min_ttc", "quiet_frames", "has_sample")

    def __init__(self, ped_id: str, veh_id: str, t_open: float):
        self.ped_id = ped_id
        self.veh_id = veh_id
        self.t_open = t_open
        self.min_ttc = math.inf
        self.t_min_ttc = t_open
        self.quiet_frames = 0
        self.has_sample = False


@dataclass
class MonitorConfig:
    smoothing_window: int = DEFAULT_SMOOTHING_WINDOW
    retirement_gap: int = DEFAULT_RETIREMENT_GAP
    close_streak: int = DEFAULT_CLOSE_STREAK
    interaction_radius: float = DEFAULT_INTERACTION_RADIUS


class Monitor:
    """Streaming monitor: feed frames in order, collect conflict and crossing
    events as they complete."""

    def __init__(
        self,
        geometry: IntersectionGeometry,
        phases: Sequence[PhaseWindow],
        config: Optional[MonitorConfig] = None,
    ):
        self.geometry = geometry
        self.config = config or MonitorConfig()
        self.assembler = TrackAssembler(self.config.retirement_gap)
        self.crossings = CrossingTracker(geometry, phases)
        self._turn_states: Dict[str, _TurnState] = {}
        self._episodes: Dict[Tuple[str, str], _Episode] = {}

    def _update_turn(self, track: LiveTrack) -> None:
        state = self._turn_states.setdefault(track.agent_id, _TurnState())
        pos = track.last_pos()
        if state.is_right_turn:
            state.prev_pos = pos
            return
        if state.prev_pos is not None:
            dx, dy = pos.x - state.prev_pos.x, pos.y - state.prev_pos.y
            if dx != 0.0 or dy != 0.0:
                heading = normalize_heading(dx, dy)
                if any(point_in_polygon(pos, z) for z in self.geometry.turn_zones):
                    state.zone_points += 1
                    if state.prev_heading is not None:
                        state.cumulative += signed_heading_delta(state.prev_heading, heading)
                        if (
                            state.cumulative <= RIGHT_TURN_THRESHOLD
                            and state.zone_points >= self.config.smoothing_window
                        ):
                            state.is_right_turn = True
                state.prev_heading = heading
        state.prev_pos = pos

    def _close_episode(self, key: Tuple[str, str], events: List[ConflictEvent]) -> None:
        ep = self._episodes.pop(key)
        if not ep.has_sample:
            return
        min_ttc = max(ep.min_ttc, CONTACT_TTC)
        events.append(
            ConflictEvent(
                ped_id=ep.ped_id,
                veh_id=ep.veh_id,
                t_min_ttc=ep.t_min_ttc,
                min_ttc=min_ttc,
                severity=severity_for_ttc(min_ttc),
            )
        )

    def _update_conflicts(self, t: float, events: List[ConflictEvent]) -> None:
        cfg = self.config
        peds: List[Tuple[LiveTrack, int]] = []
        vehs: List[Tuple[LiveTrack, int]] = []
        for track in self.assembler.live.values():
            if track.times[-1] != t or len(track) < 2:
                continue
            is_rt_vehicle = (
                track.agent_class is AgentClass.VEHICLE
                and track.agent_id in self._turn_states
                and self._turn_states[track.agent_id].is_right_turn
            )
            if track.agent_class is not AgentClass.PEDESTRIAN and not is_rt_vehicle:
                continue
            pos = track.last_pos()
            zone_idx = next(
                (i for i, z in enumerate(self.geometry.conflict_zones) if point_in_polygon(pos, z)),
                None,
            )
            if zone_idx is None:
                continue
            if track.agent_class is AgentClass.PEDESTRIAN:
                peds.append((track, zone_idx))
            else:
                vehs.append((track, zone_idx))

        active: Set[Tuple[str, str]] = set()
        for ped_track, ped_zone in peds:
            ped_state = ped_track.state(cfg.smoothing_window)
            if ped_state is None:
                continue
            for veh_track, veh_zone in vehs:
                if ped_zone != veh_zone:
                    continue
                veh_state = veh_track.state(cfg.smoothing_window)
                if veh_state is None:
                    continue
                key = (ped_track.agent_id, veh_track.agent_id)
                active.add(key)
                ep = self._episodes.get(key)
                if ep is None:
                    ep = _Episode(key[0], key[1], t)
                    self._episodes[key] = ep
                ttc = compute_ttc(ped_state, veh_state, cfg.interaction_radius)
                if ttc is not None:
                    ep.has_sample = True
                    if ttc < ep.min_ttc:
                        ep.min_ttc = ttc
                        ep.t_min_ttc = t
                if ttc is not None and ttc <= EPISODE_QUIET_TTC:
                    ep.quiet_frames = 0
                else:
                    ep.quiet_frames += 1
                if ep.quiet_frames >= cfg.close_streak:
                    self._close_episode(key, events)

        # co-presence broken: either agent left the zone (or the scene)
        for key in [k for k in self._episodes if k not in active]:
            self._close_episode(key, events)

    def process_frame(self, fd: FrameDetections) -> Tuple[List[CrossingEvent], List[ConflictEvent]]:
        crossing_events: List[CrossingEvent] = []
        conflict_events: List[ConflictEvent] = []
        retired = self.assembler.process(fd)
        for track in retired:
            self._forget_agent(track.agent_id, conflict_events)
        for det in fd.detections:
            track = self.assembler.live[det.agent_id]
            if det.agent_class is AgentClass.PEDESTRIAN:
                crossing_events.extend(
                    self.crossings.observe(det.agent_id, track.last_pos(), fd.t)
                )
            else:
                self._update_turn(track)
        self._update_conflicts(fd.t, conflict_events)
        return crossing_events, conflict_events

    def finish(self) -> List[ConflictEvent]:
        """Close all open episodes and live tracks at stream end."""
        conflict_events: List[ConflictEvent] = []
        for key in list(self._episodes):
            self._close_episode(key, conflict_events)
        self.assembler.finish()
        return conflict_events

    def _forget_agent(self, agent_id: str, conflict_events: List[ConflictEvent]) -> None:
        self._turn_states.pop(agent_id, None)
        self.crossings.forget(agent_id)
        for key in [k for k in self._episodes if agent_id in k]:
            self._close_episode(key, conflict_events)


def detect_conflicts(
    frames: Iterable[FrameDetections],
    geometry: IntersectionGeometry,
    config: Optional[MonitorConfig] = None,
) -> List[ConflictEvent]:
    """Batch conflict detection over an ordered frame sequence."""
    monitor = Monitor(geometry, [], config)
    events: List[ConflictEvent] = []
    for fd in frames:
        events.extend(monitor.process_frame(fd)[1])
    events.extend(monitor.finish())
    return events
