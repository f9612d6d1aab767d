"""Feed parsers: tracked-object stream, pedestrian phase windows, weather.

Each parser normalizes an external line-delimited JSON feed into the shared
domain types. Track positions arrive in pixels when the intersection geometry
carries a homography, otherwise in ground meters already.
"""

from __future__ import annotations

import json
import logging
import os
import time as time_mod
from dataclasses import dataclass, field
from datetime import datetime
from typing import Dict, Iterable, Iterator, List, Optional, Tuple

import httpx

from .geometry import apply_homography, Point2
from .model import (
    AgentClass,
    IntersectionGeometry,
    PhaseWindow,
    RainClass,
    WeatherSample,
)

log = logging.getLogger(__name__)

# Standard meteorological rain-rate bands, mm/h.
LIGHT_RAIN_MAX = 2.5
MODERATE_RAIN_MAX = 7.6

WEATHER_STALE_AFTER = 3600.0  # seconds; older cached samples are unusable


class StreamError(ValueError):
    """Unrecoverable feed error (ordering broken, unusable source)."""


class WeatherUnavailable(RuntimeError):
    """No live sample and no fresh cached sample."""


@dataclass(frozen=True)
class Detection:
    agent_id: str
    agent_class: AgentClass
    pos: Point2


@dataclass(frozen=True)
class FrameDetections:
    frame: int
    t: float
    detections: Tuple[Detection, ...]


def classify_rain(rain_mm_h: float) -> RainClass:
    """Band a rain rate: 0 none, (0, 2.5] light, (2.5, 7.6] moderate, heavier heavy."""
    if rain_mm_h < 0:
        raise ValueError(f"negative rain rate {rain_mm_h}")
    if rain_mm_h == 0:
        return RainClass.NONE
    if rain_mm_h <= LIGHT_RAIN_MAX:
        return RainClass.LIGHT
    if rain_mm_h <= MODERATE_RAIN_MAX:
        return RainClass.MODERATE
    return RainClass.HEAVY


def parse_track_stream(
    lines: Iterable[str], geometry: IntersectionGeometry
) -> Iterator[FrameDetections]:
    """Yield per-frame detections from a line-delimited JSON stream.

    Malformed records are skipped and logged with their line number; a frame
    index regression aborts the stream because downstream stages rely on order.
    """
    last_frame = -1
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
            frame = int(record["frame"])
            t = float(record["t"])
            detections = []
            seen_ids = set()
            for det in record["detections"]:
                agent_id = str(det["id"])
                if agent_id in seen_ids:
                    raise ValueError(f"duplicate agent id {agent_id} in frame {frame}")
                seen_ids.add(agent_id)
                agent_class = AgentClass(det["class"])
                x, y = float(det["x"]), float(det["y"])
                if geometry.homography is not None:
                    pos = apply_homography(geometry.homography, (x, y))
                else:
                    pos = Point2(x, y)
                detections.append(Detection(agent_id, agent_class, pos))
        except StreamError:
            raise
        except Exception as exc:
            log.error("track stream line %d: skipping malformed record: %s", lineno, exc)
            continue
        if frame < last_frame:
            raise StreamError(f"line {lineno}: frame {frame} regresses below {last_frame}")
        last_frame = frame
        yield FrameDetections(frame=frame, t=t, detections=tuple(detections))


def _parse_rfc3339(value: str) -> datetime:
    return datetime.fromisoformat(value.replace("Z", "+00:00")).replace(tzinfo=None)


def to_stream_seconds(value: str, geometry: IntersectionGeometry) -> float:
    return (_parse_rfc3339(value) - geometry.epoch).total_seconds()


def parse_phase_feed(
    lines: Iterable[str], geometry: IntersectionGeometry
) -> List[PhaseWindow]:
    """Parse walk-phase windows; overlapping windows per crosswalk are merged."""
    known = {cw.label for cw in geometry.crosswalks}
    by_label: Dict[str, List[Tuple[float, float]]] = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        record = json.loads(line)
        label = str(record["crosswalk"])
        if label not in known:
            raise StreamError(f"line {lineno}: unknown crosswalk label {label!r}")
        start = to_stream_seconds(record["walk_start"], geometry)
        end = to_stream_seconds(record["walk_end"], geometry)
        if end <= start:
            raise StreamError(f"line {lineno}: walk_end {record['walk_end']} <= walk_start")
        by_label.setdefault(label, []).append((start, end))

    windows: List[PhaseWindow] = []
    for label, spans in by_label.items():
        spans.sort()
        merged = [list(spans[0])]
        for start, end in spans[1:]:
            if start <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], end)
            else:
                merged.append([start, end])
        windows.extend(PhaseWindow(label, s, e) for s, e in merged)
    windows.sort(key=lambda w: (w.crosswalk_label, w.walk_start))
    return windows


def _sample_from_record(record: dict, geometry: IntersectionGeometry) -> WeatherSample:
    rain = float(record["rain_mm_h"])
    return WeatherSample(
        t=to_stream_seconds(record["t"], geometry),
        temperature_c=float(record["temp_c"]),
        humidity_pct=float(record["humidity_pct"]),
        rain_mm_h=rain,
        rain_class=classify_rain(rain),
    )


def parse_weather_feed(
    lines: Iterable[str], geometry: IntersectionGeometry
) -> List[WeatherSample]:
    samples = [
        _sample_from_record(json.loads(line), geometry)
        for line in lines
        if line.strip()
    ]
    samples.sort(key=lambda s: s.t)
    return samples


@dataclass
class WeatherClient:
    """Current-conditions weather source with a stale-bounded fallback cache.

    ``url`` points at an endpoint returning the normalized weather record; the
    API key is appended from the WEATHER_API_KEY environment variable. Offline
    use passes ``samples`` (e.g. from a weather feed file) instead.
    """

    geometry: IntersectionGeometry
    url: Optional[str] = None
    samples: List[WeatherSample] = field(default_factory=list)
    timeout: float = 5.0
    _cache: Optional[WeatherSample] = None

    def fetch(self, t: float) -> WeatherSample:
        sample = None
        if self.samples:
            eligible = [s for s in self.samples if s.t <= t]
            sample = eligible[-1] if eligible else None
        elif self.url is not None:
            try:
                params = {}
                key = os.environ.get("WEATHER_API_KEY")
                if key:
                    params["appid"] = key
                resp = httpx.get(self.url, params=params, timeout=self.timeout)
                resp.raise_for_status()
                sample = _sample_from_record(resp.json(), self.geometry)
            except Exception as exc:
                log.warning("weather source unreachable: %s", exc)
                sample = None
        if sample is not None:
            self._cache = sample
            return sample
        if self._cache is not None and t - self._cache.t <= WEATHER_STALE_AFTER:
            cached = self._cache
            return WeatherSample(
                t=cached.t,
                temperature_c=cached.temperature_c,
                humidity_pct=cached.humidity_pct,
                rain_mm_h=cached.rain_mm_h,
                rain_class=cached.rain_class,
                stale=True,
            )
        raise WeatherUnavailable(f"no weather sample available at t={t}")
