"""Command-line entry points: run the pipeline, generate scenarios, serve the
HTTP API, and query a report store."""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .analysis import compute_stats
from .pipeline import ConfigError, PipelineConfig, run_pipeline
from .sim import ScenarioConfig, ScenarioError, generate_scenario
from .store import ReportStore


@click.group()
def main() -> None:
    """Privacy-preserving pedestrian activity monitoring."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--replay", "replay_factor", type=float, default=None, help="Replay speed factor.")
@click.option("--batch", is_flag=True, help="Process the stream as fast as possible (default).")
@click.option("--live", is_flag=True, help="Tail a growing stream file.")
def run(config_path: str, replay_factor, batch: bool, live: bool) -> None:
    """Run the monitoring pipeline over a recorded or live stream."""
    try:
        config = PipelineConfig.from_file(config_path)
    except ConfigError as exc:
        raise click.ClickException(str(exc))
    logging.basicConfig(level=config.log_level)
    if live:
        mode = "live"
    elif replay_factor is not None:
        mode = "replay"
    else:
        mode = "batch"
    try:
        metrics = run_pipeline(config, mode=mode, replay_factor=replay_factor)
    except ConfigError as exc:
        raise click.ClickException(str(exc))
    click.echo(json.dumps(metrics.as_dict(), indent=2))


@main.command()
@click.option("--scenario", "scenario_path", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=None, help="Override the scenario seed.")
def simulate(scenario_path: str, out_dir: str, seed) -> None:
    """Generate a synthetic scenario (feeds + ground truth) into a directory."""
    try:
        config = ScenarioConfig.from_file(scenario_path)
        if seed is not None:
            config.seed = seed
        scenario = generate_scenario(config)
    except (ScenarioError, FileNotFoundError, json.JSONDecodeError) as exc:
        raise click.ClickException(str(exc))
    paths = scenario.write(out_dir)
    click.echo(
        json.dumps(
            {
                "frames": scenario.n_frames,
                "crossings": len(scenario.crossings),
                "conflicts": len(scenario.conflicts),
                "files": {k: str(v) for k, v in paths.items()},
            },
            indent=2,
        )
    )


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--bind", default="127.0.0.1:8000", help="addr:port to listen on.")
def serve(config_path: str, bind: str) -> None:
    """Serve the HTTP API over the configured report store."""
    import uvicorn

    from .service import create_app

    try:
        config = PipelineConfig.from_file(config_path)
    except ConfigError as exc:
        raise click.ClickException(str(exc))
    if not config.store_path.exists():
        raise click.ClickException(f"store not found: {config.store_path}")
    host, _, port = bind.partition(":")
    app = create_app(config.store_path, model_client=config.model_client())
    try:
        uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000))
    except SystemExit as exc:  # uvicorn exits non-zero when the port is taken
        sys.exit(exc.code)


def _query_records(store_path: str, start, end, intersection):
    store = ReportStore(store_path)
    return store.query(intersection_id=intersection, start=start, end=end)


@main.command()
@click.option("--store", "store_path", required=True, type=click.Path(exists=True))
@click.option("--from", "start", default=None, help="Range start (RFC3339).")
@click.option("--to", "end", default=None, help="Range end (RFC3339).")
@click.option("--intersection", default=None)
def report(store_path: str, start, end, intersection) -> None:
    """Print stored hourly reports in a time range."""
    for record in _query_records(store_path, start, end, intersection):
        click.echo(record["text"])


@main.command()
@click.option("--store", "store_path", required=True, type=click.Path(exists=True))
@click.option("--from", "start", default=None, help="Range start (RFC3339).")
@click.option("--to", "end", default=None, help="Range end (RFC3339).")
@click.option("--intersection", default=None)
def stats(store_path: str, start, end, intersection) -> None:
    """Print aggregate statistics over stored reports."""
    records = _query_records(store_path, start, end, intersection)
    if not records:
        raise click.ClickException("no reports in range")
    s = compute_stats(records)
    payload = {
        "total_pedestrians": s.total_pedestrians,
        "total_violations": s.total_violations,
        "total_conflicts": s.total_conflicts,
        "per_crosswalk": {k: v.__dict__ for k, v in s.per_crosswalk.items()},
        "day_pct": s.day_pct,
        "night_pct": s.night_pct,
        "violations_by_weather": s.violations_by_weather,
        "weather_pct": s.weather_pct,
    }
    click.echo(json.dumps(payload, indent=2))


if __name__ == "__main__":
    main()
