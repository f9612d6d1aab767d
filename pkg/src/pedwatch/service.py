"""HTTP API over the report store: reports, statistics, chart series, and
analyst sessions.

The service only reads the store file (the pipeline is the single writer);
every request re-syncs the in-memory index so readers see fully appended
records. Statistics come from the structured record fields, never from
report prose.
"""

from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Optional

from fastapi import FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from . import analysis
from .llm import ChatClient
from .store import ReportStore


class CrosswalkStatsModel(BaseModel):
    crossings: int
    violations: int
    violation_pct: float


class HourlyPointModel(BaseModel):
    hour_start: str
    pedestrians: int
    violations: int
    conflicts: int


class StatsResponse(BaseModel):
    total_pedestrians: int
    total_violations: int
    total_conflicts: int
    per_crosswalk: Dict[str, CrosswalkStatsModel]
    day_pct: float
    night_pct: float
    violations_by_weather: Dict[str, int]
    weather_pct: Dict[str, float]
    hourly: List[HourlyPointModel]


class ChartResponse(BaseModel):
    title: str
    labels: List[str]
    values: List[float]


class SessionCreateRequest(BaseModel):
    range_start: Optional[str] = Field(default=None, alias="from")
    range_end: Optional[str] = Field(default=None, alias="to")
    intersection: Optional[str] = None

    model_config = {"populate_by_name": True}


class SessionCreateResponse(BaseModel):
    session_id: str


class MessageRequest(BaseModel):
    question: str


class MessageResponse(BaseModel):
    answer: str
    provenance: str


class SessionView(BaseModel):
    session_id: str
    range_start: Optional[str]
    range_end: Optional[str]
    intersection: Optional[str]
    messages: List[dict]


def create_app(
    store_path: Path | str,
    model_client: Optional[ChatClient] = None,
    token_budget: int = analysis.DEFAULT_TOKEN_BUDGET,
) -> FastAPI:
    app = FastAPI(title="pedwatch", version="0.1.0")
    # the analyst console is served from a separate origin in development
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    store_path = Path(store_path)
    sessions: Dict[str, analysis.AnalysisSession] = {}

    def load_store() -> ReportStore:
        return ReportStore(store_path)

    def query_range(
        start: Optional[str], end: Optional[str], intersection: Optional[str]
    ) -> List[dict]:
        try:
            return load_store().query(intersection_id=intersection, start=start, end=end)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "reports": len(load_store())}

    @app.get("/reports")
    def reports(
        start: Optional[str] = Query(default=None, alias="from"),
        end: Optional[str] = Query(default=None, alias="to"),
        intersection: Optional[str] = None,
    ) -> List[dict]:
        return query_range(start, end, intersection)

    @app.get("/reports/{hour_start}")
    def report_by_hour(hour_start: str, intersection: Optional[str] = None) -> dict:
        store = load_store()
        if intersection is not None:
            record = store.get(intersection, hour_start)
        else:
            matches = [r for r in store.query() if r["hour_start"] == hour_start]
            record = matches[0] if matches else None
        if record is None:
            raise HTTPException(status_code=404, detail=f"no report for hour {hour_start}")
        return record

    def stats_for(
        start: Optional[str], end: Optional[str], intersection: Optional[str]
    ) -> analysis.HistoricalStats:
        records = query_range(start, end, intersection)
        if not records:
            raise HTTPException(status_code=404, detail="no reports in range")
        return analysis.compute_stats(records)

    @app.get("/stats", response_model=StatsResponse)
    def stats(
        start: Optional[str] = Query(default=None, alias="from"),
        end: Optional[str] = Query(default=None, alias="to"),
        intersection: Optional[str] = None,
    ) -> StatsResponse:
        s = stats_for(start, end, intersection)
        return StatsResponse(
            total_pedestrians=s.total_pedestrians,
            total_violations=s.total_violations,
            total_conflicts=s.total_conflicts,
            per_crosswalk={
                label: CrosswalkStatsModel(**cw.__dict__) for label, cw in s.per_crosswalk.items()
            },
            day_pct=s.day_pct,
            night_pct=s.night_pct,
            violations_by_weather=s.violations_by_weather,
            weather_pct=s.weather_pct,
            hourly=[HourlyPointModel(**p.__dict__) for p in s.hourly],
        )

    @app.get("/charts/violations-by-crosswalk", response_model=ChartResponse)
    def chart_crosswalks(
        start: Optional[str] = Query(default=None, alias="from"),
        end: Optional[str] = Query(default=None, alias="to"),
        intersection: Optional[str] = None,
    ) -> ChartResponse:
        s = stats_for(start, end, intersection)
        labels = list(s.per_crosswalk)
        return ChartResponse(
            title="Crossing violation percentage by crosswalk",
            labels=labels,
            values=[s.per_crosswalk[label].violation_pct for label in labels],
        )

    @app.get("/charts/day-night", response_model=ChartResponse)
    def chart_day_night(
        start: Optional[str] = Query(default=None, alias="from"),
        end: Optional[str] = Query(default=None, alias="to"),
        intersection: Optional[str] = None,
    ) -> ChartResponse:
        s = stats_for(start, end, intersection)
        return ChartResponse(
            title="Crossing violations by time of day",
            labels=["day", "night"],
            values=[s.day_pct, s.night_pct],
        )

    @app.get("/charts/weather", response_model=ChartResponse)
    def chart_weather(
        start: Optional[str] = Query(default=None, alias="from"),
        end: Optional[str] = Query(default=None, alias="to"),
        intersection: Optional[str] = None,
    ) -> ChartResponse:
        s = stats_for(start, end, intersection)
        labels = list(s.weather_pct)
        return ChartResponse(
            title="Crossing violations by weather",
            labels=labels,
            values=[s.weather_pct[label] for label in labels],
        )

    @app.post("/sessions", response_model=SessionCreateResponse)
    def create_session(request: SessionCreateRequest) -> SessionCreateResponse:
        try:
            session = analysis.new_session(
                request.range_start, request.range_end, request.intersection
            )
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        sessions[session.session_id] = session
        return SessionCreateResponse(session_id=session.session_id)

    def get_session(session_id: str) -> analysis.AnalysisSession:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return session

    @app.post("/sessions/{session_id}/messages", response_model=MessageResponse)
    def post_message(session_id: str, request: MessageRequest) -> MessageResponse:
        session = get_session(session_id)
        if not request.question.strip():
            raise HTTPException(status_code=422, detail="question must be non-empty")
        records = query_range(session.range_start, session.range_end, session.intersection_id)
        message = analysis.run_analysis(
            session, request.question, records, client=model_client, token_budget=token_budget
        )
        return MessageResponse(answer=message["content"], provenance=message["provenance"])

    @app.get("/sessions/{session_id}", response_model=SessionView)
    def session_view(session_id: str) -> SessionView:
        session = get_session(session_id)
        return SessionView(
            session_id=session.session_id,
            range_start=session.range_start,
            range_end=session.range_end,
            intersection=session.intersection_id,
            messages=session.messages,
        )

    return app
