"""Pipeline wiring: feeds -> monitor -> hourly reports -> store, with
per-frame latency metrics.

Batch and replay modes consume a recorded track stream; live mode tails a
growing stream file with retry/backoff. Reports are emitted when an hour
closes (plus a grace period so late-completing crossings land in the right
hour) and a final partial hour is flushed and flagged at stream end.
"""

from __future__ import annotations

import json
import logging
import time as time_mod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional

import numpy as np

from .analysis import DEFAULT_TOKEN_BUDGET
from .ingest import parse_phase_feed, parse_track_stream, parse_weather_feed
from .llm import ChatClient, HttpChatClient, client_from_env
from .model import ConflictEvent, CrossingEvent, IntersectionGeometry
from .monitor import Monitor, MonitorConfig
from .reporter import HOUR_SECONDS, aggregate_hour, build_report, report_to_record
from .sim import geometry_from_config, replay
from .store import ReportStore

log = logging.getLogger(__name__)

HOUR_CLOSE_GRACE = 60.0  # seconds past an hour end before its report is cut


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    geometry_path: Path
    tracks_path: Path
    phases_path: Path
    weather_path: Optional[Path]
    store_path: Path
    fps: int = 20
    model_endpoint: Optional[str] = None
    model_name: str = "phi3"
    log_level: str = "INFO"
    monitor: MonitorConfig = field(default_factory=MonitorConfig)

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        data = json.loads(path.read_text())
        base = path.parent

        def resolve(key, required=True):
            value = data.get(key)
            if value is None:
                if required:
                    raise ConfigError(f"config missing required key {key!r}")
                return None
            return (base / value).resolve() if not Path(value).is_absolute() else Path(value)

        monitor_kwargs = data.get("monitor", {})
        config = cls(
            geometry_path=resolve("geometry"),
            tracks_path=resolve("tracks"),
            phases_path=resolve("phases"),
            weather_path=resolve("weather", required=False),
            store_path=resolve("store"),
            fps=int(data.get("fps", 20)),
            model_endpoint=data.get("model_endpoint"),
            model_name=data.get("model", "phi3"),
            log_level=data.get("log_level", "INFO"),
            monitor=MonitorConfig(**monitor_kwargs),
        )
        for name, p in [("geometry", config.geometry_path), ("phases", config.phases_path)]:
            if not p.exists():
                raise ConfigError(f"{name} file not found: {p}")
        return config

    def load_geometry(self) -> IntersectionGeometry:
        return geometry_from_config(json.loads(self.geometry_path.read_text()))

    def model_client(self) -> Optional[ChatClient]:
        if self.model_endpoint:
            return HttpChatClient(endpoint=self.model_endpoint, model=self.model_name)
        return client_from_env()


@dataclass
class PipelineMetrics:
    frames: int = 0
    crossings: int = 0
    conflicts: int = 0
    reports: int = 0
    source_retries: int = 0
    mean_latency_ms: float = 0.0
    max_latency_ms: float = 0.0
    p99_latency_ms: float = 0.0
    report_render_max_ms: float = 0.0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


class _HourBuckets:
    """Accumulates events per hour and cuts reports as hours close."""

    def __init__(self, geometry, weather, store, model_client):
        self.geometry = geometry
        self.weather = weather
        self.store = store
        self.model_client = model_client
        self.crossings: Dict[int, List[CrossingEvent]] = {}
        self.conflicts: Dict[int, List[ConflictEvent]] = {}
        self.closed: set = set()
        self.touched: set = set()
        self.render_times: List[float] = []

    def add(self, crossings: List[CrossingEvent], conflicts: List[ConflictEvent]) -> None:
        for ev in crossings:
            h = int(ev.t_enter // HOUR_SECONDS)
            self.touched.add(h)
            if h in self.closed:
                log.warning("crossing at t=%.2f arrived after hour %d closed; dropped", ev.t_enter, h)
                continue
            self.crossings.setdefault(h, []).append(ev)
        for ev in conflicts:
            h = int(ev.t_min_ttc // HOUR_SECONDS)
            self.touched.add(h)
            if h in self.closed:
                log.warning("conflict at t=%.2f arrived after hour %d closed; dropped", ev.t_min_ttc, h)
                continue
            self.conflicts.setdefault(h, []).append(ev)

    def note_time(self, t: float) -> None:
        self.touched.add(int(t // HOUR_SECONDS))

    def close_through(self, t: float) -> int:
        """Close every touched hour whose end (plus grace) has passed."""
        emitted = 0
        for h in sorted(self.touched):
            if h in self.closed:
                continue
            if t >= (h + 1) * HOUR_SECONDS + HOUR_CLOSE_GRACE:
                self._emit(h, partial=False)
                emitted += 1
        return emitted

    def flush(self, stream_end: float) -> int:
        emitted = 0
        for h in sorted(self.touched):
            if h in self.closed:
                continue
            partial = stream_end < (h + 1) * HOUR_SECONDS
            self._emit(h, partial=partial)
            emitted += 1
        return emitted

    def _emit(self, h: int, partial: bool) -> None:
        self.closed.add(h)
        t0 = time_mod.perf_counter()
        agg = aggregate_hour(
            self.crossings.pop(h, []),
            self.conflicts.pop(h, []),
            self.weather,
            h * HOUR_SECONDS,
            self.geometry,
            partial=partial,
        )
        report = build_report(agg, self.geometry, self.model_client)
        self.render_times.append(time_mod.perf_counter() - t0)
        self.store.append(report_to_record(report, self.geometry))


def _live_lines(path: Path, metrics: PipelineMetrics, idle_limit: float = 10.0) -> Iterator[str]:
    """Tail a growing stream file; retries with backoff while the source is
    missing, and stops after ``idle_limit`` seconds without new data."""
    backoff = 0.1
    while not path.exists():
        metrics.source_retries += 1
        if backoff > 5.0:
            raise ConfigError(f"track source never appeared: {path}")
        time_mod.sleep(backoff)
        backoff *= 2
    idle = 0.0
    with path.open("r", encoding="utf-8") as fh:
        while True:
            line = fh.readline()
            if line:
                idle = 0.0
                yield line
                continue
            if idle >= idle_limit:
                return
            time_mod.sleep(0.05)
            idle += 0.05


def run_pipeline(
    config: PipelineConfig,
    mode: str = "batch",
    replay_factor: Optional[float] = None,
) -> PipelineMetrics:
    """Run feeds through the monitor and reporter into the store.

    ``mode`` is "batch" (as fast as possible), "replay" (paced at
    fps * replay_factor), or "live" (tail the stream file).
    """
    geometry = config.load_geometry()
    phases = parse_phase_feed(config.phases_path.read_text().splitlines(), geometry)
    weather = (
        parse_weather_feed(config.weather_path.read_text().splitlines(), geometry)
        if config.weather_path and config.weather_path.exists()
        else []
    )
    store = ReportStore(config.store_path)
    monitor = Monitor(geometry, phases, config.monitor)
    metrics = PipelineMetrics()
    buckets = _HourBuckets(geometry, weather, store, config.model_client())

    if mode == "live":
        lines: Iterator[str] = _live_lines(config.tracks_path, metrics)
    else:
        if not config.tracks_path.exists():
            raise ConfigError(f"tracks file not found: {config.tracks_path}")
        lines = iter(config.tracks_path.read_text().splitlines())

    frames = parse_track_stream(lines, geometry)
    if mode == "replay":
        frames = replay(frames, config.fps, replay_factor or 1.0)

    latencies: List[float] = []
    last_t = 0.0
    for fd in frames:
        t0 = time_mod.perf_counter()
        crossings, conflicts = monitor.process_frame(fd)
        latencies.append(time_mod.perf_counter() - t0)
        buckets.add(crossings, conflicts)
        buckets.note_time(fd.t)
        metrics.frames += 1
        metrics.crossings += len(crossings)
        metrics.conflicts += len(conflicts)
        buckets.close_through(fd.t)
        last_t = fd.t

    tail_conflicts = monitor.finish()
    buckets.add([], tail_conflicts)
    metrics.conflicts += len(tail_conflicts)
    stream_end = last_t + 1.0 / config.fps if metrics.frames else 0.0
    buckets.flush(stream_end)
    metrics.reports = len(buckets.closed)

    if latencies:
        arr = np.array(latencies) * 1000.0
        metrics.mean_latency_ms = float(arr.mean())
        metrics.max_latency_ms = float(arr.max())
        metrics.p99_latency_ms = float(np.percentile(arr, 99))
    if buckets.render_times:
        metrics.report_render_max_ms = max(buckets.render_times) * 1000.0
    return metrics
