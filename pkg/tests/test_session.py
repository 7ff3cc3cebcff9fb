import json
from dataclasses import replace

import pytest

from neurobulb.config import EngineConfig
from neurobulb.engine import Engine
from neurobulb.session import (
    EventOrderError,
    ReplayMismatchError,
    SessionClosedError,
    SessionError,
    SessionWriter,
    canon,
    canon_payload,
    load_session,
    replay_session,
)

METRICS = dict(
    attention=0.5, engagement=0.5, excitement=0.5,
    interest=0.5, relaxation=0.5, stress=0.5,
)


def test_canonical_rounding():
    assert canon(0.123456789123) == 0.123456789
    assert canon_payload({"a": [1.0000000001, "x"], "b": 2}) == {"a": [1.0, "x"], "b": 2}


def test_writer_and_loader_round_trip(tmp_path):
    path = tmp_path / "s.fbsession.jsonl"
    cfg = EngineConfig(seed=9)
    with SessionWriter(path, cfg) as writer:
        writer.record(0.1, "metric", METRICS)
        writer.record(0.1, "phrase_start", {"index": 0, "duration_s": 58.0, "seed": 9})
        writer.record(0.2, "metric", METRICS)
    record = load_session(path)
    assert record.header["config_hash"] == cfg.config_hash()
    assert record.header["seed"] == 9
    assert [e.kind for e in record.events] == ["metric", "phrase_start", "metric"]
    assert record.events[0].payload == METRICS


def test_metric_event_serialization(tmp_path):
    path = tmp_path / "s.jsonl"
    with SessionWriter(path, EngineConfig()) as writer:
        writer.record(1.5, "metric", METRICS)
    lines = path.read_text().splitlines()
    data = json.loads(lines[1])
    assert data["t"] == 1.5
    assert data["kind"] == "metric"
    assert len(data["payload"]) == 6


def test_out_of_order_rejected(tmp_path):
    with SessionWriter(tmp_path / "s.jsonl", EngineConfig()) as writer:
        writer.record(1.0, "metric", METRICS)
        with pytest.raises(EventOrderError):
            writer.record(0.5, "metric", METRICS)


def test_closed_session_rejected(tmp_path):
    writer = SessionWriter(tmp_path / "s.jsonl", EngineConfig())
    writer.close()
    with pytest.raises(SessionClosedError):
        writer.record(0.0, "metric", METRICS)


def test_unknown_kind_rejected(tmp_path):
    with SessionWriter(tmp_path / "s.jsonl", EngineConfig()) as writer:
        with pytest.raises(SessionError):
            writer.record(0.0, "speech", {})


def test_loader_validates_phrase_pairing(tmp_path):
    path = tmp_path / "s.jsonl"
    with SessionWriter(path, EngineConfig()) as writer:
        writer.record(0.0, "phrase_end", {"index": 0})
    with pytest.raises(SessionError, match="phrase_end"):
        load_session(path)


def test_replay_empty_events(tmp_path):
    path = tmp_path / "s.jsonl"
    cfg = EngineConfig()
    SessionWriter(path, cfg).close()
    record = load_session(path)
    assert replay_session(record, cfg) == []


def _record_session(tmp_path, seconds=20.0, seed=42):
    path = tmp_path / "run.fbsession.jsonl"
    cfg = EngineConfig(seed=seed, record_path=str(path))
    engine = Engine(cfg)
    engine.run_offline(seconds)
    engine.stop_recording()
    return path, cfg


def test_replay_reproduces_parameter_trace(tmp_path):
    path, cfg = _record_session(tmp_path)
    record = load_session(path)
    trace = replay_session(record, cfg)
    recorded = [e.payload for e in record.params_events()]
    assert trace == recorded


def test_replay_is_fixed_point(tmp_path):
    path, cfg = _record_session(tmp_path)
    record = load_session(path)
    once = replay_session(record, cfg)
    twice = replay_session(record, cfg)
    assert once == twice


def test_replay_refuses_different_seed(tmp_path):
    path, cfg = _record_session(tmp_path)
    record = load_session(path)
    with pytest.raises(ReplayMismatchError) as excinfo:
        replay_session(record, replace(cfg, seed=7))
    assert any("seed" in d for d in excinfo.value.diffs)


def test_replay_refuses_different_mapping_constant(tmp_path):
    path, cfg = _record_session(tmp_path)
    record = load_session(path)
    bad = replace(cfg, mapping=replace(cfg.mapping, tau_visual=2.0))
    with pytest.raises(ReplayMismatchError) as excinfo:
        replay_session(record, bad)
    assert any("tau_visual" in d for d in excinfo.value.diffs)


def test_phrase_events_are_flushed_and_paired(tmp_path):
    path, cfg = _record_session(tmp_path, seconds=125.0)
    record = load_session(path)  # loader enforces pairing
    kinds = [e.kind for e in record.events]
    assert kinds.count("phrase_start") >= 2
    assert kinds.count("phrase_start") - kinds.count("phrase_end") in (0, 1)
