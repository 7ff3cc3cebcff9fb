"""Deterministic session recording and replay.

A session is a JSON Lines file: one header line (engine version, config and
its hash, seed, wall-clock start) followed by timestamped events. Recording
is opt-in; the default is to keep nothing, since the metric stream is
personal data. Replays re-run the mapping pipeline over the recorded metric
events and must reproduce the recorded parameter snapshots exactly after
canonical rounding.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import IO, Any, Optional

from . import __version__
from .config import EngineConfig
from .mapping import ParamPipeline
from .metrics import METRIC_ORDER, clamp_sample

SCHEMA_VERSION = 1
EVENT_KINDS = ("metric", "params", "phrase_start", "phrase_end")

CANONICAL_DECIMALS = 9


def canon(value: float) -> float:
    """Canonical rounding applied to every float that crosses the log."""
    return round(float(value), CANONICAL_DECIMALS)


def canon_payload(payload: Any) -> Any:
    if isinstance(payload, float):
        return canon(payload)
    if isinstance(payload, dict):
        return {k: canon_payload(v) for k, v in payload.items()}
    if isinstance(payload, (list, tuple)):
        return [canon_payload(v) for v in payload]
    return payload


class SessionError(Exception):
    pass


class SessionClosedError(SessionError):
    pass


class EventOrderError(SessionError):
    pass


class ReplayMismatchError(SessionError):
    """Replay refused: the stored config does not match the live one."""

    def __init__(self, diffs: list[str]) -> None:
        self.diffs = diffs
        super().__init__(
            "config mismatch, refusing to replay:\n  " + "\n  ".join(diffs)
        )


@dataclass(frozen=True)
class SessionEvent:
    t: float
    kind: str
    payload: dict


@dataclass
class SessionRecord:
    header: dict
    events: list[SessionEvent]

    @property
    def config_hash(self) -> str:
        return self.header["config_hash"]

    def metric_events(self) -> list[SessionEvent]:
        return [e for e in self.events if e.kind == "metric"]

    def params_events(self) -> list[SessionEvent]:
        return [e for e in self.events if e.kind == "params"]


class SessionWriter:
    """Single-writer append log; events must arrive in time order."""

    def __init__(self, path, config: EngineConfig) -> None:
        self.path = Path(path)
        self._fh: Optional[IO[str]] = self.path.open("w")
        self._last_t = float("-inf")
        header = {
            "kind": "header",
            "schema": SCHEMA_VERSION,
            "engine_version": __version__,
            "config_hash": config.config_hash(),
            "config": config.to_dict(),
            "seed": config.seed,
            "started_at": datetime.now(timezone.utc).isoformat(),
        }
        self._fh.write(json.dumps(header, sort_keys=True) + "\n")
        self._fh.flush()

    def record(self, t: float, kind: str, payload: dict) -> None:
        if self._fh is None:
            raise SessionClosedError("session is closed")
        if kind not in EVENT_KINDS:
            raise SessionError(f"unknown event kind {kind!r}")
        if t < self._last_t:
            raise EventOrderError(
                f"event at t={t} arrived after t={self._last_t}"
            )
        self._last_t = t
        line = {"t": canon(t), "kind": kind, "payload": canon_payload(payload)}
        self._fh.write(json.dumps(line, sort_keys=True) + "\n")
        if kind in ("phrase_start", "phrase_end"):
            self._fh.flush()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.flush()
            self._fh.close()
            self._fh = None

    def __enter__(self) -> "SessionWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def load_session(path) -> SessionRecord:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise SessionError(f"{path}: empty session file")
    header = json.loads(lines[0])
    if header.get("kind") != "header":
        raise SessionError(f"{path}: first line must be the header")
    events: list[SessionEvent] = []
    last_t = float("-inf")
    open_phrase = False
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        data = json.loads(line)
        t, kind = data["t"], data["kind"]
        if kind not in EVENT_KINDS:
            raise SessionError(f"{path}:{lineno}: unknown event kind {kind!r}")
        if t < last_t:
            raise EventOrderError(f"{path}:{lineno}: timestamps must be non-decreasing")
        if kind == "phrase_start":
            if open_phrase:
                raise SessionError(f"{path}:{lineno}: phrase_start inside open phrase")
            open_phrase = True
        elif kind == "phrase_end":
            if not open_phrase:
                raise SessionError(f"{path}:{lineno}: phrase_end without phrase_start")
            open_phrase = False
        last_t = t
        events.append(SessionEvent(t=t, kind=kind, payload=data["payload"]))
    return SessionRecord(header=header, events=events)


def _config_diff(stored: dict, live: dict, prefix: str = "") -> list[str]:
    diffs = []
    for key in sorted(set(stored) | set(live)):
        path = f"{prefix}{key}"
        a, b = stored.get(key), live.get(key)
        if isinstance(a, dict) and isinstance(b, dict):
            diffs.extend(_config_diff(a, b, prefix=f"{path}."))
        elif a != b:
            diffs.append(f"{path}: recorded={a!r} live={b!r}")
    return diffs


def params_payload(t, params, rendered_power, phase) -> dict:
    return {
        "t": t,
        "power": params.power,
        "color_mix": list(params.color_mix),
        "bw": params.bw,
        "dpower_per_s": params.dpower_per_s,
        "loop_freq_hz": params.loop_freq_hz,
        "rendered_power": rendered_power,
        "phase": phase,
    }


def replay_session(record: SessionRecord, config: EngineConfig) -> list[dict]:
    """Re-run the mapping pipeline over recorded metric events.

    Refuses to run when the live config hash differs from the recorded one
    (reporting which fields changed). Returns one canonically rounded params
    payload per metric event; with a matching config these are exactly the
    payloads that were recorded.
    """
    if record.config_hash != config.config_hash():
        stored_cfg = record.header.get("config", {})
        diffs = _config_diff(stored_cfg, config.to_dict()) or ["config hash differs"]
        raise ReplayMismatchError(diffs)

    metric_events = record.metric_events()
    if not metric_events:
        return []

    trace: list[dict] = []
    pipeline = ParamPipeline(cfg=config.mapping)
    prev_t = 0.0
    for event in metric_events:
        values = [event.payload[m.value] for m in METRIC_ORDER]
        sample, _ = clamp_sample(event.t, *values)
        params, rendered, phase = pipeline.step(sample, event.t - prev_t)
        prev_t = event.t
        trace.append(
            canon_payload(params_payload(event.t, params, rendered, phase))
        )
    return trace
