"""Control loop: sources -> mapping -> published snapshots.

One thread owns all mutable engine state and runs the tick loop at the
configured rate (10 Hz by default). Per tick it drains operator commands,
polls the active source, advances the parameter pipeline, publishes an
immutable snapshot for renderers/audio/bridge, and appends session events
when recording. Offline runs use a virtual clock (no sleeping) and are
fully deterministic for a given config + seed.
"""

from __future__ import annotations

import queue
import threading
import time
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from .audio import PhraseSpec, open_live_sink, plan_phrase, synth_phrase, write_wav
from .config import EngineConfig
from .mapping import FractalParams, ParamPipeline
from .metrics import METRIC_ORDER, MetricSample, clamp_sample
from .osc import OscListener
from .session import SessionWriter, canon, params_payload
from .sources import (
    MODES,
    LiveSource,
    ManualSource,
    MetricMailbox,
    MetricSource,
    ReplaySource,
    SourceError,
    SyntheticSource,
)


@dataclass(frozen=True)
class PhraseInfo:
    index: int
    start_t: float
    duration_s: float
    seed: int


@dataclass(frozen=True)
class EngineSnapshot:
    """Immutable view of the engine published once per tick."""

    t: float
    tick: int
    mode: str
    sample: MetricSample
    params: FractalParams
    rendered_power: float
    phase: float
    phrase: Optional[PhraseInfo]
    source_exhausted: bool


class Mailbox:
    """Latest-value slot; single writer, any number of readers."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._value: Optional[EngineSnapshot] = None

    def publish(self, value: EngineSnapshot) -> None:
        with self._lock:
            self._value = value

    def read(self) -> Optional[EngineSnapshot]:
        with self._lock:
            return self._value


class CommandError(Exception):
    pass


@dataclass
class _PendingCommand:
    payload: dict
    reply: "queue.Queue[dict]" = field(default_factory=lambda: queue.Queue(maxsize=1))


class Engine:
    """Wires sources, mapping, session recording and phrase scheduling."""

    def __init__(self, config: EngineConfig) -> None:
        self.config = config
        self.tick_dt = 1.0 / config.source.tick_hz
        self.snapshots = Mailbox()
        self.mailbox = MetricMailbox()  # live OSC feed
        self._commands: "queue.Queue[_PendingCommand]" = queue.Queue()
        self._listener: Optional[OscListener] = None
        self._writer: Optional[SessionWriter] = None
        self._recording_path = config.record_path
        self._pipeline = ParamPipeline(cfg=config.mapping)
        self._t = 0.0
        self._tick_count = 0
        self._phrase: Optional[PhraseInfo] = None
        self._phrase_count = 0
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None
        self.on_phrase_start: Optional[Callable[[PhraseInfo, MetricSample], None]] = None

        # phrase audio: spec planned at phrase start, rendered-power trace
        # accumulated per tick, synthesized when the phrase completes
        self._phrase_spec: Optional[PhraseSpec] = None
        self._phrase_trace: list[tuple[float, float]] = []
        self._audio_sink = None
        if config.audio.device is not None:
            self._audio_sink = open_live_sink(config.audio.device)
            if self._audio_sink is None:
                warnings.warn(
                    f"audio device {config.audio.device!r} unavailable, "
                    "degrading to offline rendering",
                    RuntimeWarning,
                    stacklevel=2,
                )

        self._sources: dict[str, MetricSource] = {
            "manual": ManualSource(),
            "synthetic": SyntheticSource(
                seed=config.seed,
                profile=config.source.profile,
                tick_hz=config.source.tick_hz,
            ),
            "live": LiveSource(self.mailbox),
        }
        if config.source.replay_path:
            self._sources["replay"] = ReplaySource(config.source.replay_path)
        if config.source.mode not in self._sources:
            raise SourceError(
                f"source mode {config.source.mode!r} is not available "
                f"(have {sorted(self._sources)})"
            )
        self.mode = config.source.mode
        if config.record_path:
            self.start_recording(config.record_path)

    @property
    def audio_enabled(self) -> bool:
        return self.config.audio.out_dir is not None or self._audio_sink is not None

    # -- recording ---------------------------------------------------------

    def start_recording(self, path) -> None:
        if self._writer is not None:
            raise CommandError("already recording")
        self._writer = SessionWriter(path, self.config)
        self._recording_path = str(path)

    def stop_recording(self) -> Optional[str]:
        if self._writer is None:
            return None
        self._writer.close()
        self._writer = None
        return self._recording_path

    @property
    def recording(self) -> bool:
        return self._writer is not None

    # -- OSC ---------------------------------------------------------------

    def start_osc(self, port: Optional[int] = None, host: str = "0.0.0.0") -> OscListener:
        if self._listener is None:
            self._listener = OscListener(
                port if port is not None else self.config.osc_port,
                self.mailbox.feed,
                host=host,
            )
        return self._listener

    # -- commands ----------------------------------------------------------

    def submit_command(self, payload: dict, timeout: float = 2.0) -> dict:
        """Enqueue a command; blocks until the control loop acks it.

        Safe to call from any thread. When the loop is not running (offline
        tests, single-step tools) the command is applied immediately.
        """
        if self._thread is None or not self._thread.is_alive():
            return self._apply_command(payload)
        pending = _PendingCommand(payload=payload)
        self._commands.put(pending)
        try:
            return pending.reply.get(timeout=timeout)
        except queue.Empty:
            return {"ok": False, "error": "command timed out"}

    def _apply_command(self, payload: dict) -> dict:
        try:
            action = payload.get("action")
            if action == "set_mode":
                mode = payload["mode"]
                if mode not in MODES:
                    raise CommandError(f"unknown mode {mode!r}")
                if mode not in self._sources:
                    raise CommandError(f"mode {mode!r} is not available")
                self.mode = mode
            elif action == "set_metric":
                if self.mode != "manual":
                    raise CommandError("set_metric requires manual mode")
                source = self._sources["manual"]
                assert isinstance(source, ManualSource)
                value = source.set_metric(payload["name"], float(payload["value"]))
                return self._ack({"metric": payload["name"], "value": value})
            elif action == "set_profile":
                profile = payload["profile"]
                self._sources["synthetic"] = SyntheticSource(
                    seed=self.config.seed,
                    profile=profile,
                    tick_hz=self.config.source.tick_hz,
                )
                self.mode = "synthetic"
            elif action == "record_start":
                self.start_recording(payload["path"])
            elif action == "record_stop":
                self.stop_recording()
            elif action == "set_config_overrides":
                overrides = payload.get("overrides", {})
                if not isinstance(overrides, dict):
                    raise CommandError("overrides must be an object")
                self._apply_overrides(overrides)
            else:
                raise CommandError(f"unknown command {action!r}")
            return self._ack({})
        except CommandError as exc:
            return {"ok": False, "error": str(exc)}
        except (KeyError, TypeError, ValueError, SourceError) as exc:
            return {"ok": False, "error": f"malformed command: {exc}"}

    def _apply_overrides(self, overrides: dict) -> None:
        # Live-steerable constants only; structural settings need a restart.
        allowed = {"k_dp", "tau_visual", "tau_freq", "osc_depth", "f_min", "f_max"}
        unknown = set(overrides) - allowed
        if unknown:
            raise CommandError(f"overrides not steerable live: {sorted(unknown)}")
        mapping = replace(
            self.config.mapping, **{k: float(v) for k, v in overrides.items()}
        )
        self.config = replace(self.config, mapping=mapping)
        self._pipeline.cfg = mapping
        if self._pipeline.state is not None:
            self._pipeline.state.cfg = mapping

    def _ack(self, extra: dict) -> dict:
        state = {"mode": self.mode, "recording": self.recording}
        state.update(extra)
        return {"ok": True, "state": state}

    # -- tick --------------------------------------------------------------

    @property
    def source(self) -> MetricSource:
        return self._sources[self.mode]

    def tick(self, now: Optional[float] = None) -> EngineSnapshot:
        """Run one control tick at time `now` (virtual clock when omitted).

        Timestamps are canonically rounded before use so that a recorded
        session replays through the exact same arithmetic.
        """
        while True:
            try:
                pending = self._commands.get_nowait()
            except queue.Empty:
                break
            pending.reply.put(self._apply_command(pending.payload))

        new_t = canon(self._t + self.tick_dt) if now is None else canon(now)
        dt = new_t - self._t
        self._t = new_t
        self._tick_count += 1

        raw = self.source.next_sample(new_t)
        sample, _clamped = clamp_sample(
            canon(raw.t), *(canon(v) for v in raw.values())
        )
        params, rendered, phase = self._pipeline.step(sample, dt)

        if self._writer is not None:
            self._writer.record(new_t, "metric", sample.as_dict())

        phrase = self._phrase
        if phrase is not None and new_t >= phrase.start_t + phrase.duration_s:
            if self._writer is not None:
                self._writer.record(
                    new_t, "phrase_end", {"index": phrase.index}
                )
            self._finish_phrase_audio(phrase)
            self._phrase = phrase = None
        if phrase is None:
            phrase = self._start_phrase(new_t, params, sample)
        if self.audio_enabled:
            self._phrase_trace.append((new_t, rendered))

        if self._writer is not None:
            self._writer.record(
                new_t, "params", params_payload(new_t, params, rendered, phase)
            )

        snapshot = EngineSnapshot(
            t=new_t,
            tick=self._tick_count,
            mode=self.mode,
            sample=sample,
            params=params,
            rendered_power=rendered,
            phase=phase,
            phrase=phrase,
            source_exhausted=self.source.exhausted,
        )
        self.snapshots.publish(snapshot)
        return snapshot

    def _start_phrase(
        self, t: float, params: FractalParams, sample: MetricSample
    ) -> PhraseInfo:
        phrase = PhraseInfo(
            index=self._phrase_count,
            start_t=t,
            duration_s=params.loop_period_s,
            seed=self.config.seed + self._phrase_count,
        )
        self._phrase_count += 1
        self._phrase = phrase
        if self.audio_enabled:
            self._phrase_spec = plan_phrase(
                sample,
                phrase.seed,
                self.config.audio,
                self.config.mapping,
                duration_s=phrase.duration_s,  # audio shares the visual cycle
            )
            self._phrase_trace = []
        if self._writer is not None:
            self._writer.record(
                t,
                "phrase_start",
                {
                    "index": phrase.index,
                    "duration_s": phrase.duration_s,
                    "seed": phrase.seed,
                },
            )
        if self.on_phrase_start is not None:
            self.on_phrase_start(phrase, sample)
        return phrase

    def _finish_phrase_audio(self, phrase: PhraseInfo) -> None:
        if not self.audio_enabled or self._phrase_spec is None or not self._phrase_trace:
            return
        spec = self._phrase_spec
        times = np.array([t - phrase.start_t for t, _ in self._phrase_trace])
        powers = np.array([p for _, p in self._phrase_trace])
        buffer = synth_phrase(
            spec, (times, powers), self.config.audio.sample_rate
        )
        if self.config.audio.out_dir is not None:
            out_dir = Path(self.config.audio.out_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            write_wav(
                buffer,
                out_dir / f"phrase_{phrase.index:03d}.wav",
                self.config.audio.sample_rate,
            )
        if self._audio_sink is not None:
            try:
                self._audio_sink.write(buffer.astype("float32"))
            except Exception:
                self._audio_sink = None
                warnings.warn(
                    "live audio output failed, degrading to offline rendering",
                    RuntimeWarning,
                    stacklevel=2,
                )
        self._phrase_spec = None
        self._phrase_trace = []

    # -- run loops ---------------------------------------------------------

    def run_offline(self, duration_s: float) -> list[EngineSnapshot]:
        """Tick a virtual clock as fast as possible; returns all snapshots."""
        ticks = round(duration_s * self.config.source.tick_hz)
        return [self.tick() for _ in range(ticks)]

    def start(self) -> None:
        """Run the live loop on a background thread (wall clock)."""
        if self._thread is not None and self._thread.is_alive():
            return
        self._stop.clear()
        self._thread = threading.Thread(target=self._run_live, name="engine", daemon=True)
        self._thread.start()

    def _run_live(self) -> None:
        start = time.monotonic()
        next_tick = start
        while not self._stop.is_set():
            now = time.monotonic()
            if now < next_tick:
                time.sleep(min(next_tick - now, 0.05))
                continue
            self.tick(now=now - start)
            next_tick += self.tick_dt
            if next_tick < now:  # fell behind; don't try to catch up in a burst
                next_tick = now + self.tick_dt

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)
            self._thread = None
        if self._listener is not None:
            self._listener.close()
            self._listener = None
        self.stop_recording()

    def __enter__(self) -> "Engine":
        return self

    def __exit__(self, *exc) -> None:
        self.stop()


def metrics_payload(snapshot: EngineSnapshot) -> dict[str, Any]:
    return {
        "t": snapshot.t,
        "values": {m.value: getattr(snapshot.sample, m.value) for m in METRIC_ORDER},
    }
