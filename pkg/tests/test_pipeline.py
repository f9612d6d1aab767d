import json
import threading
import time

import pytest

from pedwatch.pipeline import (
    ConfigError,
    PipelineConfig,
    PipelineMetrics,
    _live_lines,
    run_pipeline,
)
from pedwatch.sim import ScenarioConfig, generate_scenario
from pedwatch.store import ReportStore

TARGET_TTC = 1.2


def write_scenario(out_dir, **overrides):
    base = dict(
        duration_hours=1.0,
        fps=20,
        seed=5,
        arrival_rate={"A": 12.0, "B": 12.0},
        conflicts=[{"hour": 0, "min_ttc": TARGET_TTC}],
        weather_mm_h={0: 1.0},
    )
    base.update(overrides)
    scenario = generate_scenario(ScenarioConfig(**base))
    paths = scenario.write(out_dir)
    config_path = out_dir / "pipeline.json"
    config_path.write_text(
        json.dumps(
            {
                "geometry": "geometry.json",
                "tracks": "tracks.jsonl",
                "phases": "phases.jsonl",
                "weather": "weather.jsonl",
                "store": "reports.jsonl",
                "fps": base["fps"],
            }
        )
    )
    return scenario, config_path, paths


@pytest.fixture(scope="module")
def one_hour_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("hour")
    scenario, config_path, paths = write_scenario(out)
    config = PipelineConfig.from_file(config_path)
    metrics = run_pipeline(config, mode="batch")
    store = ReportStore(config.store_path)
    return scenario, metrics, store


class TestBatchHour:
    def test_one_report_emitted(self, one_hour_run):
        scenario, metrics, store = one_hour_run
        assert metrics.reports == 1
        assert len(store) == 1

    def test_counts_match_ground_truth(self, one_hour_run):
        scenario, metrics, store = one_hour_run
        (expected,) = scenario.expected_hourly()
        (record,) = store.query()
        assert record["counts"]["pedestrians"] == expected["pedestrians"]
        assert record["counts"]["violations"] == expected["violations"]
        assert record["counts"]["conflicts"] == expected["conflicts"]
        assert record["per_crosswalk"] == expected["per_crosswalk"]
        assert record["day"]["day_violations"] == expected["day_violations"]
        assert record["weather_class"] == expected["weather_class"]
        assert not record["partial"]

    def test_detected_conflict_ttc_close_to_target(self, one_hour_run):
        scenario, metrics, store = one_hour_run
        assert metrics.conflicts >= 1
        (record,) = store.query()
        assert record["counts"]["conflicts"] == 1

    def test_report_text_counts_agree(self, one_hour_run):
        from pedwatch.reporter import extract_counts

        _, _, store = one_hour_run
        (record,) = store.query()
        assert extract_counts(record["text"]) == (
            record["counts"]["pedestrians"],
            record["counts"]["violations"],
            record["counts"]["conflicts"],
        )

    def test_latency_metrics_populated(self, one_hour_run):
        _, metrics, _ = one_hour_run
        assert metrics.frames == 72000
        assert 0 < metrics.mean_latency_ms <= metrics.p99_latency_ms <= metrics.max_latency_ms


class TestPartialHour:
    def test_final_partial_hour_flagged(self, tmp_path):
        _, config_path, _ = write_scenario(
            tmp_path, duration_hours=0.4, conflicts=[], weather_mm_h={}
        )
        config = PipelineConfig.from_file(config_path)
        run_pipeline(config, mode="batch")
        (record,) = ReportStore(config.store_path).query()
        assert record["partial"] is True


class TestReplayMode:
    def test_replay_produces_same_report(self, tmp_path):
        _, config_path, _ = write_scenario(
            tmp_path, duration_hours=0.01, arrival_rate={"A": 200.0, "B": 0.0},
            conflicts=[], weather_mm_h={}
        )
        config = PipelineConfig.from_file(config_path)
        metrics = run_pipeline(config, mode="replay", replay_factor=10_000.0)
        assert metrics.frames == 720
        config.store_path.unlink()
        batch = run_pipeline(config, mode="batch")
        assert batch.crossings == metrics.crossings


class TestConfigErrors:
    def test_missing_config_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            PipelineConfig.from_file(tmp_path / "nope.json")

    def test_missing_geometry_named_in_error(self, tmp_path):
        config_path = tmp_path / "pipeline.json"
        config_path.write_text(
            json.dumps(
                {"geometry": "missing-geometry.json", "tracks": "t.jsonl",
                 "phases": "p.jsonl", "store": "s.jsonl"}
            )
        )
        (tmp_path / "p.jsonl").write_text("")
        with pytest.raises(ConfigError, match="missing-geometry.json"):
            PipelineConfig.from_file(config_path)

    def test_missing_required_key(self, tmp_path):
        config_path = tmp_path / "pipeline.json"
        config_path.write_text(json.dumps({"geometry": "g.json"}))
        with pytest.raises(ConfigError, match="tracks"):
            PipelineConfig.from_file(config_path)

    def test_missing_tracks_at_run_time(self, tmp_path):
        _, config_path, paths = write_scenario(
            tmp_path, duration_hours=0.01, conflicts=[], weather_mm_h={}
        )
        paths["tracks"].unlink()
        config = PipelineConfig.from_file(config_path)
        with pytest.raises(ConfigError, match="tracks"):
            run_pipeline(config, mode="batch")


class TestLiveTail:
    def test_tails_lines_written_after_start(self, tmp_path):
        path = tmp_path / "stream.jsonl"
        metrics = PipelineMetrics()

        def writer():
            time.sleep(0.3)
            with path.open("w") as fh:
                for i in range(5):
                    fh.write(f"line{i}\n")
                    fh.flush()
                    time.sleep(0.05)

        thread = threading.Thread(target=writer)
        thread.start()
        lines = list(_live_lines(path, metrics, idle_limit=0.5))
        thread.join()
        assert [l.strip() for l in lines] == [f"line{i}" for i in range(5)]
        assert metrics.source_retries >= 1

    def test_source_never_appears(self, tmp_path):
        metrics = PipelineMetrics()
        with pytest.raises(ConfigError, match="never appeared"):
            list(_live_lines(tmp_path / "ghost.jsonl", metrics, idle_limit=0.1))
