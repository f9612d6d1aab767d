"""Reporting stage: hourly aggregation, the fixed report sentence grammar,
optional model polishing with a numeric guard, and the storage-savings ratio.
"""

from __future__ import annotations

import json
import logging
import re
from datetime import datetime, timedelta
from typing import Dict, List, Optional, Sequence, Tuple

from .model import (
    ConflictEvent,
    CrossingEvent,
    CrosswalkTally,
    HourlyAggregate,
    HourlyReport,
    IntersectionGeometry,
    RainClass,
    ReportSource,
    Severity,
    WeatherSample,
)

log = logging.getLogger(__name__)

HOUR_SECONDS = 3600.0

WEATHER_PHRASES = {
    RainClass.NONE: "clear weather",
    RainClass.LIGHT: "during light raining",
    RainClass.MODERATE: "during moderate raining",
    RainClass.HEAVY: "during heavy raining",
}


def dominant_weather(
    samples: Sequence[WeatherSample], hour_start: float, hour_end: float
) -> Optional[RainClass]:
    """Rain class covering the most time in [hour_start, hour_end).

    Each sample holds from its timestamp until the next one; the sample in
    effect at hour_start (the latest at or before it) covers the opening gap.
    Ties go to the heavier class. None when no sample applies.
    """
    ordered = sorted(samples, key=lambda s: s.t)
    coverage: Dict[RainClass, float] = {}
    current: Optional[RainClass] = None
    cursor = hour_start
    for sample in ordered:
        if sample.t <= hour_start:
            current = sample.rain_class
            continue
        if sample.t >= hour_end:
            break
        if current is not None:
            coverage[current] = coverage.get(current, 0.0) + (sample.t - cursor)
        cursor = sample.t
        current = sample.rain_class
    if current is not None:
        coverage[current] = coverage.get(current, 0.0) + (hour_end - cursor)
    if not coverage:
        return None
    return max(coverage.items(), key=lambda kv: (kv[1], kv[0].rank))[0]


def aggregate_hour(
    crossings: Sequence[CrossingEvent],
    conflicts: Sequence[ConflictEvent],
    weather: Sequence[WeatherSample],
    hour_start: float,
    geometry: IntersectionGeometry,
    partial: bool = False,
) -> HourlyAggregate:
    """Fold one hour of events into an aggregate.

    Crossings bucket by entry time, conflicts by the time of their minimum
    TTC; an event outside the hour is rejected. Conflicts of severity NONE
    are excluded from the conflict count.
    """
    hour_end = hour_start + HOUR_SECONDS
    for ev in crossings:
        if not hour_start <= ev.t_enter < hour_end:
            raise ValueError(f"crossing at t={ev.t_enter} outside hour [{hour_start}, {hour_end})")
    for ev in conflicts:
        if not hour_start <= ev.t_min_ttc < hour_end:
            raise ValueError(f"conflict at t={ev.t_min_ttc} outside hour [{hour_start}, {hour_end})")

    per_crosswalk = {
        cw.label: CrosswalkTally(
            crossings=sum(1 for ev in crossings if ev.crosswalk_label == cw.label),
            violations=sum(
                1 for ev in crossings if ev.crosswalk_label == cw.label and ev.violation
            ),
        )
        for cw in geometry.crosswalks
    }
    violations = [ev for ev in crossings if ev.violation]
    return HourlyAggregate(
        intersection_id=geometry.intersection_id,
        hour_start=hour_start,
        hour_end=hour_end,
        weather_class=dominant_weather(weather, hour_start, hour_end),
        pedestrian_count=len(crossings),
        violation_count=len(violations),
        conflict_count=sum(1 for ev in conflicts if ev.severity is not Severity.NONE),
        per_crosswalk=per_crosswalk,
        day_violations=sum(1 for ev in violations if ev.daytime),
        night_violations=sum(1 for ev in violations if not ev.daytime),
        partial=partial,
    )


def _clock_12h(dt: datetime) -> str:
    hour = dt.hour % 12
    if hour == 0:
        hour = 12
    suffix = "am" if dt.hour < 12 else "pm"
    return f"{hour:02d}:{dt.minute:02d} {suffix}"


def _date_text(dt: datetime) -> str:
    return f"{dt.strftime('%B')} {dt.day}, {dt.year}"


def _count_phrase(n: int, singular: str, plural: str) -> str:
    if n == 0:
        return f"no {plural}"
    if n == 1:
        return f"1 {singular}"
    return f"{n} {plural}"


def render_report(agg: HourlyAggregate, geometry: IntersectionGeometry) -> str:
    """Render the deterministic hourly report sentence.

    Grammar: "On {Month D, YYYY}, between {hh:mm am/pm} and {hh:mm am/pm},
    at {location}, {weather}, {N} pedestrians crossed with {V} and {C}."
    The weather clause is dropped entirely when no weather data was available.
    """
    start = geometry.to_datetime(agg.hour_start)
    end = geometry.to_datetime(agg.hour_end)
    head = (
        f"On {_date_text(start)}, between {_clock_12h(start)} and {_clock_12h(end)}, "
        f"at {geometry.location_label}"
    )
    weather = f", {WEATHER_PHRASES[agg.weather_class]}" if agg.weather_class is not None else ""
    violations = _count_phrase(agg.violation_count, "crossing violation", "crossing violations")
    conflicts = _count_phrase(agg.conflict_count, "conflict", "conflicts")
    return (
        f"{head}{weather}, {agg.pedestrian_count} pedestrians crossed "
        f"with {violations} and {conflicts}."
    )


_COUNTS_RE = re.compile(
    r"(\d+) pedestrians crossed with "
    r"(?:no|(\d+)) crossing violations? and (?:no|(\d+)) conflicts?"
)


def extract_counts(text: str) -> Optional[Tuple[int, int, int]]:
    """Pull (pedestrians, violations, conflicts) back out of a report sentence."""
    m = _COUNTS_RE.search(text)
    if m is None:
        return None
    peds = int(m.group(1))
    violations = int(m.group(2)) if m.group(2) else 0
    conflicts = int(m.group(3)) if m.group(3) else 0
    return peds, violations, conflicts


def build_report(
    agg: HourlyAggregate,
    geometry: IntersectionGeometry,
    model_client=None,
) -> HourlyReport:
    text = render_report(agg, geometry)
    if model_client is None:
        return HourlyReport(aggregate=agg, text=text, source=ReportSource.TEMPLATE)
    return polish_report(text, agg, model_client)


POLISH_INSTRUCTION = (
    "Rewrite the following hourly pedestrian activity report in clear, natural "
    "prose. Keep every number, date, time, and location exactly as given."
)


def polish_report(text: str, agg: HourlyAggregate, client) -> HourlyReport:
    """Polish the template sentence through a chat model, guarding the numbers.

    Any client failure, or model output whose extracted counts differ from the
    aggregate, falls back to the template text.
    """
    try:
        polished = client.complete(
            [
                {"role": "system", "content": POLISH_INSTRUCTION},
                {"role": "user", "content": text},
            ]
        )
    except Exception as exc:
        log.warning("model client failed, keeping template report: %s", exc)
        return HourlyReport(aggregate=agg, text=text, source=ReportSource.TEMPLATE)
    counts = extract_counts(polished) if polished else None
    expected = (agg.pedestrian_count, agg.violation_count, agg.conflict_count)
    if counts != expected:
        log.warning(
            "model output counts %s differ from aggregate %s, keeping template", counts, expected
        )
        return HourlyReport(aggregate=agg, text=text, source=ReportSource.TEMPLATE)
    return HourlyReport(aggregate=agg, text=polished, source=ReportSource.MODEL_POLISHED)


def storage_ratio(video_bitrate_bps: float, duration_s: float, report_bytes: int) -> float:
    """Video bytes over report bytes, as a percentage."""
    if video_bitrate_bps <= 0 or duration_s <= 0:
        raise ValueError("bitrate and duration must be positive")
    if report_bytes <= 0:
        raise ValueError(f"report_bytes must be positive, got {report_bytes}")
    video_bytes = video_bitrate_bps * duration_s / 8.0
    return video_bytes / report_bytes * 100.0


# ---------------------------------------------------------------------------
# Persisted record schema (one JSON object per line in the report store)


def report_to_record(report: HourlyReport, geometry: IntersectionGeometry) -> dict:
    agg = report.aggregate
    return {
        "intersection_id": agg.intersection_id,
        "hour_start": geometry.to_datetime(agg.hour_start).isoformat(),
        "hour_end": geometry.to_datetime(agg.hour_end).isoformat(),
        "weather_class": agg.weather_class.value if agg.weather_class else None,
        "counts": {
            "pedestrians": agg.pedestrian_count,
            "violations": agg.violation_count,
            "conflicts": agg.conflict_count,
        },
        "per_crosswalk": {
            label: {"crossings": tally.crossings, "violations": tally.violations}
            for label, tally in sorted(agg.per_crosswalk.items())
        },
        "day": {"day_violations": agg.day_violations, "night_violations": agg.night_violations},
        "partial": agg.partial,
        "text": report.text,
        "source": report.source.value,
    }


def record_to_report(record: dict, geometry: IntersectionGeometry) -> HourlyReport:
    hour_start = (datetime.fromisoformat(record["hour_start"]) - geometry.epoch).total_seconds()
    agg = HourlyAggregate(
        intersection_id=record["intersection_id"],
        hour_start=hour_start,
        hour_end=hour_start + HOUR_SECONDS,
        weather_class=RainClass(record["weather_class"]) if record["weather_class"] else None,
        pedestrian_count=record["counts"]["pedestrians"],
        violation_count=record["counts"]["violations"],
        conflict_count=record["counts"]["conflicts"],
        per_crosswalk={
            label: CrosswalkTally(t["crossings"], t["violations"])
            for label, t in record["per_crosswalk"].items()
        },
        day_violations=record["day"]["day_violations"],
        night_violations=record["day"]["night_violations"],
        partial=record.get("partial", False),
    )
    return HourlyReport(aggregate=agg, text=record["text"], source=ReportSource(record["source"]))
