"""Historical analysis: aggregate statistics over stored reports, prompt
assembly for model-backed analysis, and a deterministic rule-based fallback
summarizer.

All statistics are computed from the structured fields of stored report
records, never re-parsed from report prose (prose may be model-polished).
"""

from __future__ import annotations

import math
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Dict, List, Optional, Sequence

from .llm import ChatClient

ANALYSIS_PREAMBLE = (
    "You are professional traffic safety engineer. Analyze these reports and "
    "generate a report about the pedestrian safety status at that intersection. "
    "Reports:"
)

DEFAULT_TOKEN_BUDGET = 4000
CHARS_PER_TOKEN = 4  # coarse token estimate for budget checks


def _pct(numerator: int, denominator: int) -> float:
    if denominator == 0:
        return 0.0
    return round(numerator / denominator * 100.0, 1)


@dataclass(frozen=True)
class CrosswalkStats:
    crossings: int
    violations: int
    violation_pct: float


@dataclass(frozen=True)
class HourlyPoint:
    hour_start: str
    pedestrians: int
    violations: int
    conflicts: int


@dataclass(frozen=True)
class HistoricalStats:
    total_pedestrians: int
    total_violations: int
    total_conflicts: int
    per_crosswalk: Dict[str, CrosswalkStats]
    day_pct: float
    night_pct: float
    violations_by_weather: Dict[str, int]
    weather_pct: Dict[str, float]
    hourly: List[HourlyPoint]


def compute_stats(records: Sequence[dict]) -> HistoricalStats:
    """Aggregate statistics over stored report records (persisted schema)."""
    if not records:
        raise ValueError("compute_stats requires at least one report")
    per_cw_crossings: Dict[str, int] = {}
    per_cw_violations: Dict[str, int] = {}
    by_weather: Dict[str, int] = {}
    day_v = night_v = 0
    totals = [0, 0, 0]
    hourly: List[HourlyPoint] = []
    for record in sorted(records, key=lambda r: (r["intersection_id"], r["hour_start"])):
        counts = record["counts"]
        totals[0] += counts["pedestrians"]
        totals[1] += counts["violations"]
        totals[2] += counts["conflicts"]
        for label, tally in record["per_crosswalk"].items():
            per_cw_crossings[label] = per_cw_crossings.get(label, 0) + tally["crossings"]
            per_cw_violations[label] = per_cw_violations.get(label, 0) + tally["violations"]
        day_v += record["day"]["day_violations"]
        night_v += record["day"]["night_violations"]
        weather = record["weather_class"] or "unknown"
        by_weather[weather] = by_weather.get(weather, 0) + counts["violations"]
        hourly.append(
            HourlyPoint(
                hour_start=record["hour_start"],
                pedestrians=counts["pedestrians"],
                violations=counts["violations"],
                conflicts=counts["conflicts"],
            )
        )

    total_violations = totals[1]
    night_pct = _pct(night_v, day_v + night_v)
    # complement of the rounded value so the split sums to exactly 100
    day_pct = round(100.0 - night_pct, 1) if day_v + night_v else 0.0
    return HistoricalStats(
        total_pedestrians=totals[0],
        total_violations=total_violations,
        total_conflicts=totals[2],
        per_crosswalk={
            label: CrosswalkStats(
                crossings=per_cw_crossings[label],
                violations=per_cw_violations.get(label, 0),
                violation_pct=_pct(per_cw_violations.get(label, 0), per_cw_crossings[label]),
            )
            for label in sorted(per_cw_crossings)
        },
        day_pct=day_pct,
        night_pct=night_pct,
        violations_by_weather=dict(sorted(by_weather.items())),
        weather_pct={
            w: _pct(v, total_violations) for w, v in sorted(by_weather.items())
        },
        hourly=hourly,
    )


@dataclass(frozen=True)
class AssembledPrompt:
    text: str
    compressed: bool
    no_data: bool

    def estimated_tokens(self) -> int:
        return estimate_tokens(self.text)


def estimate_tokens(text: str) -> int:
    return math.ceil(len(text) / CHARS_PER_TOKEN)


def build_analysis_prompt(
    records: Sequence[dict],
    question: str,
    token_budget: int = DEFAULT_TOKEN_BUDGET,
) -> AssembledPrompt:
    """Assemble the analysis prompt: preamble, "report{i}: ..." lines in
    chronological order, then the analyst question.

    When the prompt would exceed the token budget, the oldest reports are
    compressed into a single aggregate line.
    """
    if not question.strip():
        raise ValueError("question must be non-empty")
    ordered = sorted(records, key=lambda r: r["hour_start"])

    def assemble(compress_first: int) -> str:
        lines = [ANALYSIS_PREAMBLE]
        if not ordered:
            lines.append("(no reports available for the selected range)")
        if compress_first > 0:
            head = ordered[:compress_first]
            peds = sum(r["counts"]["pedestrians"] for r in head)
            violations = sum(r["counts"]["violations"] for r in head)
            conflicts = sum(r["counts"]["conflicts"] for r in head)
            lines.append(
                f"reports 1-{compress_first} (compressed): {peds} pedestrians crossed, "
                f"{violations} crossing violations, {conflicts} conflicts in total."
            )
        for i, record in enumerate(ordered[compress_first:], start=compress_first + 1):
            lines.append(f"report{i}: {record['text']}")
        lines.append(question)
        return "\n".join(lines)

    compress_first = 0
    text = assemble(compress_first)
    while estimate_tokens(text) > token_budget and compress_first < len(ordered):
        compress_first += 1
        text = assemble(compress_first)
    if estimate_tokens(text) > token_budget:
        raise ValueError(
            f"prompt exceeds token budget {token_budget} even fully compressed"
        )
    return AssembledPrompt(text=text, compressed=compress_first > 0, no_data=not ordered)


def rule_based_summary(records: Sequence[dict]) -> str:
    """Deterministic structured summary used when no model client is available."""
    if not records:
        return "Rule-based summary: no reports are available for the selected range."
    stats = compute_stats(records)
    lines = [
        "Rule-based summary (no language model configured).",
        f"Across {len(records)} hourly reports: {stats.total_pedestrians} pedestrians crossed, "
        f"{stats.total_violations} crossing violations, {stats.total_conflicts} conflicts.",
    ]
    for label, cw in stats.per_crosswalk.items():
        lines.append(
            f"Crosswalk {label}: {cw.crossings} crossings, {cw.violations} violations "
            f"({cw.violation_pct}% violation rate)."
        )
    if stats.per_crosswalk and stats.total_violations:
        worst = max(stats.per_crosswalk.items(), key=lambda kv: kv[1].violation_pct)
        lines.append(
            f"Highest violation rate at crosswalk {worst[0]} ({worst[1].violation_pct}%)."
        )
    if stats.total_violations:
        lines.append(
            f"Violations split {stats.night_pct}% at night versus {stats.day_pct}% in daytime."
        )
        weather_bits = ", ".join(
            f"{w}: {n} ({stats.weather_pct[w]}%)" for w, n in stats.violations_by_weather.items()
        )
        lines.append(f"Violations by weather class: {weather_bits}.")
    return "\n".join(lines)


@dataclass
class AnalysisSession:
    """One analyst conversation pinned to an immutable report range."""

    session_id: str
    range_start: Optional[str]
    range_end: Optional[str]
    intersection_id: Optional[str] = None
    messages: List[dict] = field(default_factory=list)

    def add_message(self, role: str, content: str, provenance: Optional[str] = None) -> dict:
        message = {
            "role": role,
            "content": content,
            "timestamp": datetime.now(timezone.utc).isoformat(),
        }
        if provenance is not None:
            message["provenance"] = provenance
        self.messages.append(message)
        return message


def new_session(
    range_start: Optional[str],
    range_end: Optional[str],
    intersection_id: Optional[str] = None,
) -> AnalysisSession:
    if range_start is not None and range_end is not None and range_start > range_end:
        raise ValueError(f"inverted range {range_start} > {range_end}")
    return AnalysisSession(
        session_id=uuid.uuid4().hex,
        range_start=range_start,
        range_end=range_end,
        intersection_id=intersection_id,
    )


def run_analysis(
    session: AnalysisSession,
    question: str,
    records: Sequence[dict],
    client: Optional[ChatClient] = None,
    token_budget: int = DEFAULT_TOKEN_BUDGET,
) -> dict:
    """Answer one analyst question over the session's reports.

    With a client the model answer is used (provenance "model"); without one,
    or on any client failure, a rule-based summary answers instead.
    """
    session.add_message("user", question)
    answer: Optional[str] = None
    provenance = "rule-based"
    if client is not None:
        try:
            prompt = build_analysis_prompt(records, question, token_budget)
            answer = client.complete([{"role": "user", "content": prompt.text}])
            provenance = "model"
        except Exception:
            answer = None
    if answer is None:
        answer = rule_based_summary(records)
    return session.add_message("assistant", answer, provenance=provenance)
