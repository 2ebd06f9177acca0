"""Persistence roundtrips: trace CSV, LCDN1 binary, metrics CSV, summary
JSON, and the no-partial-output guarantee."""
import json

import numpy as np
import pytest

from leocdn.config import parse_config
from leocdn.engine import ScenarioSetup, generate_traces, replay
from leocdn.errors import InputError
from leocdn.strategies import StrategyKind
from leocdn.traceio import (
    atomic_write,
    read_metrics_csv,
    read_trace_bin,
    read_trace_csv,
    read_traces,
    write_metrics_csv,
    write_summary_json,
    write_trace_bin,
    write_trace_csv,
)


@pytest.fixture(scope="module")
def small_run():
    cfg = parse_config(
        preset="switzerland",
        overrides=(
            "scenario.rate=40", "scenario.num_items=150", "scenario.duration_s=10",
            "scenario.zipf_exponent=1.5", "scenario.seed=3", "warmup_s=2",
        ),
    )
    setup = ScenarioSetup(cfg)
    steps = list(generate_traces(cfg, setup))
    return cfg, setup, steps


def assert_steps_equal(a, b):
    assert a.t == b.t
    assert a.egress == b.egress
    assert a.origin_gst == b.origin_gst
    assert np.array_equal(a.client, b.client)
    assert np.array_equal(a.item, b.item)
    assert np.array_equal(a.size, b.size)
    assert np.array_equal(a.ingress, b.ingress)
    assert np.array_equal(a.full_edges, b.full_edges)
    assert {k: tuple(v) for k, v in a.sat_paths.items() if k in b.sat_paths} == dict(
        b.sat_paths
    )


class TestTraceCsv:
    def test_roundtrip(self, small_run, tmp_path):
        cfg, _, steps = small_run
        path = tmp_path / "traces.csv"
        spp = cfg.constellation.sats_per_plane
        n = write_trace_csv(path, steps, cfg.scenario.seed, spp)
        assert n == 400
        text = path.read_text().splitlines()
        assert text[0] == "# seed=3"
        back = list(read_trace_csv(path, spp))
        assert len(back) == len(steps)
        for a, b in zip(steps, back):
            assert_steps_equal(a, b)

    def test_replay_independence(self, small_run, tmp_path):
        # file-based replay must produce exactly the in-memory metrics
        cfg, setup, steps = small_run
        path = tmp_path / "traces.csv"
        spp = cfg.constellation.sats_per_plane
        write_trace_csv(path, steps, cfg.scenario.seed, spp)
        stream_metrics, stream_rep = replay(steps, StrategyKind.SAT_TTL, cfg, setup=setup)
        file_metrics, file_rep = replay(
            read_trace_csv(path, spp), StrategyKind.SAT_TTL, cfg, setup=setup
        )
        assert stream_metrics == file_metrics
        assert stream_rep == file_rep

    def test_missing_provenance_rejected(self, tmp_path):
        path = tmp_path / "traces.csv"
        path.write_text("t,riff\n")
        with pytest.raises(InputError):
            list(read_trace_csv(path, 66))


class TestTraceBinary:
    def test_roundtrip(self, small_run, tmp_path):
        cfg, _, steps = small_run
        path = tmp_path / "traces.lcdn"
        spp = cfg.constellation.sats_per_plane
        n = write_trace_bin(path, steps, cfg.scenario.seed, spp)
        assert n == 400
        assert path.read_bytes()[:5] == b"LCDN1"
        back = list(read_trace_bin(path))
        assert len(back) == len(steps)
        for a, b in zip(steps, back):
            assert_steps_equal(a, b)

    def test_magic_dispatch(self, small_run, tmp_path):
        cfg, _, steps = small_run
        spp = cfg.constellation.sats_per_plane
        p_csv = tmp_path / "a.csv"
        p_bin = tmp_path / "b.lcdn"
        write_trace_csv(p_csv, steps, cfg.scenario.seed, spp)
        write_trace_bin(p_bin, steps, cfg.scenario.seed, spp)
        for a, b in zip(read_traces(p_csv, spp), read_traces(p_bin, spp)):
            assert_steps_equal(a, b)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "x.lcdn"
        path.write_bytes(b"NOPE!xxxx")
        with pytest.raises(InputError):
            list(read_trace_bin(path))


class TestMetricsAndSummary:
    def test_metrics_roundtrip(self, small_run, tmp_path):
        cfg, setup, steps = small_run
        metrics, report = replay(steps, StrategyKind.SAT, cfg, setup=setup)
        path = tmp_path / "metrics.csv"
        write_metrics_csv(path, metrics, cfg.scenario.seed)
        lines = path.read_text().splitlines()
        assert lines[0] == "# seed=3"
        assert lines[1].startswith("t,avg_hops,hit_ratio,")
        back = read_metrics_csv(path)
        assert back == metrics

    def test_summary_json_fields(self, small_run, tmp_path):
        cfg, setup, steps = small_run
        _, report = replay(steps, StrategyKind.SAT_REP, cfg, setup=setup)
        path = tmp_path / "summary.json"
        write_summary_json(path, report, cfg.scenario.seed)
        doc = json.loads(path.read_text())
        assert doc["seed"] == 3
        assert doc["strategy"] == "sat-rep"
        assert doc["zipf_exponent"] == 1.5
        assert "total_request_bytes" in doc and "time_to_99_hit_ratio" in doc


class TestAtomicWrite:
    def test_no_partial_file_on_failure(self, tmp_path):
        path = tmp_path / "out.csv"
        with pytest.raises(RuntimeError):
            with atomic_write(path) as fh:
                fh.write("partial")
                raise RuntimeError("boom")
        assert not path.exists()
        assert not (tmp_path / "out.csv.tmp").exists()

    def test_success_replaces(self, tmp_path):
        path = tmp_path / "out.csv"
        with atomic_write(path) as fh:
            fh.write("ok")
        assert path.read_text() == "ok"
