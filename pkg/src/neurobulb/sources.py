"""Unified metric stream abstraction.

Four interchangeable sources produce MetricSamples for the control loop:
live OSC input, CSV replay, a seeded synthetic random walk, and a manual
override the operator drives from the console. All sources are polled (zero-
order hold); interpolation and smoothing happen downstream in mapping.
"""

from __future__ import annotations

import csv
import re
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .metrics import METRIC_ORDER, MetricName, MetricSample, clamp_sample
from .osc import OscMessage

TICK_HZ = 10.0

MODES = ("live", "replay", "synthetic", "manual")

# Bundled full-sample address (six floats, canonical metric order) and the
# per-metric convention third-party EEG bridges commonly use.
METRICS_ADDRESS = "/fractalbrain/metrics"
PER_METRIC_PREFIX = "/met/"

_NEUTRAL = {m.value: 0.5 for m in METRIC_ORDER}


class SourceError(Exception):
    pass


class ReplayFormatError(SourceError):
    """Replay CSV violates the documented schema."""


class MetricSource:
    """Base interface: poll next_sample(now) with non-decreasing `now`."""

    mode: str = "abstract"

    def __init__(self) -> None:
        self.exhausted = False

    def next_sample(self, now: float) -> MetricSample:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# Replay
# ---------------------------------------------------------------------------

_RANGE_RE = re.compile(r"^#\s*range\s*=\s*0\s*\.\.\s*(1|100)\s*$")
_EXPECTED_COLUMNS = ("t",) + tuple(m.value for m in METRIC_ORDER)


@dataclass(frozen=True)
class ReplayRow:
    t: float
    values: tuple[float, ...]  # canonical metric order, normalized to [0, 1]


def load_replay_file(path) -> list[ReplayRow]:
    """Parse a replay CSV.

    Line 1 declares the native range (`# range=0..1` or `# range=0..100`),
    line 2 the column order `t,attention,...`; rows must have exactly seven
    columns with strictly increasing t.
    """
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ReplayFormatError(f"{path}: empty file")
    m = _RANGE_RE.match(lines[0])
    if not m:
        raise ReplayFormatError(
            f"{path}:1: expected '# range=0..1' or '# range=0..100' header"
        )
    scale = float(m.group(1))
    reader = csv.reader(lines[1:])
    try:
        columns = tuple(c.strip() for c in next(reader))
    except StopIteration:
        raise ReplayFormatError(f"{path}: missing column header") from None
    if columns != _EXPECTED_COLUMNS:
        raise ReplayFormatError(
            f"{path}:2: columns must be {','.join(_EXPECTED_COLUMNS)}"
        )
    rows: list[ReplayRow] = []
    for lineno, record in enumerate(reader, start=3):
        if not record or (len(record) == 1 and not record[0].strip()):
            continue
        if len(record) != 7:
            raise ReplayFormatError(f"{path}:{lineno}: expected 7 columns, got {len(record)}")
        try:
            numbers = [float(x) for x in record]
        except ValueError as exc:
            raise ReplayFormatError(f"{path}:{lineno}: {exc}") from None
        t = numbers[0]
        if rows and t <= rows[-1].t:
            raise ReplayFormatError(
                f"{path}:{lineno}: t must be strictly increasing "
                f"({t} after {rows[-1].t})"
            )
        rows.append(ReplayRow(t=t, values=tuple(v / scale for v in numbers[1:])))
    if not rows:
        raise ReplayFormatError(f"{path}: no data rows")
    return rows


def write_replay_file(path, rows: list[tuple[float, ...]], scale: int = 1) -> None:
    """Write (t, six metrics) rows in the replay schema; inverse of the loader."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# range=0..{scale}\n")
        fh.write(",".join(_EXPECTED_COLUMNS) + "\n")
        writer = csv.writer(fh)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])


class ReplaySource(MetricSource):
    """Replays a recorded CSV with zero-order hold between rows."""

    mode = "replay"

    def __init__(self, path) -> None:
        super().__init__()
        self._rows = load_replay_file(path)
        self._index = 0

    def next_sample(self, now: float) -> MetricSample:
        while (
            self._index + 1 < len(self._rows)
            and self._rows[self._index + 1].t <= now
        ):
            self._index += 1
        self.exhausted = (
            self._index == len(self._rows) - 1 and now >= self._rows[-1].t
        )
        row = self._rows[self._index]
        sample, _ = clamp_sample(row.t, *row.values)
        return sample


# ---------------------------------------------------------------------------
# Synthetic
# ---------------------------------------------------------------------------

# Mean levels per profile, canonical metric order:
# attention, engagement, excitement, interest, relaxation, stress
PROFILES: dict[str, dict] = {
    "calm": {
        "mu": (0.7, 0.5, 0.2, 0.5, 0.5, 0.15),
        "sigma": 0.05,
    },
    "agitated": {
        "mu": (0.35, 0.5, 0.8, 0.5, 0.5, 0.75),
        "sigma": 0.05,
    },
    "drifting": {
        "mu": (0.5, 0.5, 0.5, 0.5, 0.5, 0.5),
        "sigma": 0.15,
    },
}

MEAN_REVERSION = 0.6  # per-second pull toward the profile mean


class SyntheticSource(MetricSource):
    """Deterministic bounded random walk per metric.

    m(t+dt) = clamp(m(t) + sigma*sqrt(dt)*g + kappa*(mu - m(t))*dt) with g
    drawn from a seeded generator. The walk advances on a fixed internal
    tick grid, so querying the same `now` twice yields identical samples.
    """

    mode = "synthetic"

    def __init__(
        self,
        seed: int,
        profile: str,
        sigma: float | None = None,
        kappa: float = MEAN_REVERSION,
        tick_hz: float = TICK_HZ,
    ) -> None:
        super().__init__()
        if profile not in PROFILES:
            raise SourceError(
                f"unknown profile {profile!r}, expected one of {sorted(PROFILES)}"
            )
        self.profile = profile
        spec = PROFILES[profile]
        self._mu = np.array(spec["mu"], dtype=np.float64)
        self._sigma = spec["sigma"] if sigma is None else sigma
        self._kappa = kappa
        self._dt = 1.0 / tick_hz
        self._rng = np.random.default_rng(seed)
        self._values = self._mu.copy()
        self._tick = 0
        self._t = 0.0

    def next_sample(self, now: float) -> MetricSample:
        target_tick = int(now / self._dt)
        while self._tick < target_tick:
            g = self._rng.standard_normal(len(self._values))
            self._values = np.clip(
                self._values
                + self._sigma * np.sqrt(self._dt) * g
                + self._kappa * (self._mu - self._values) * self._dt,
                0.0,
                1.0,
            )
            self._tick += 1
            self._t = self._tick * self._dt
        sample, _ = clamp_sample(self._t, *self._values)
        return sample


# ---------------------------------------------------------------------------
# Manual
# ---------------------------------------------------------------------------

class ManualSource(MetricSource):
    """Operator-driven values; set_metric() feeds the console sliders."""

    mode = "manual"

    def __init__(self, initial: dict[str, float] | None = None) -> None:
        super().__init__()
        self._values = dict(_NEUTRAL)
        if initial:
            for name, value in initial.items():
                self.set_metric(name, value)

    def set_metric(self, name: str, value: float) -> float:
        key = MetricName(name).value  # raises ValueError for unknown names
        self._values[key] = min(max(float(value), 0.0), 1.0)
        return self._values[key]

    def next_sample(self, now: float) -> MetricSample:
        sample, _ = clamp_sample(now, **self._values)
        return sample


# ---------------------------------------------------------------------------
# Live (OSC-fed)
# ---------------------------------------------------------------------------

class MetricMailbox:
    """Thread-safe latest-value slot between the OSC listener and the loop.

    Accepts either a bundled full sample at METRICS_ADDRESS (six floats in
    canonical order) or per-metric messages /met/<name> with one float.
    Unknown addresses and malformed payloads are counted, never raised.
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._values = dict(_NEUTRAL)
        self.updates = 0
        self.ignored = 0

    def feed(self, msg: OscMessage) -> None:
        if msg.address == METRICS_ADDRESS:
            if len(msg.args) != len(METRIC_ORDER) or not all(
                isinstance(a, float) for a in msg.args
            ):
                self.ignored += 1
                return
            with self._lock:
                for metric, value in zip(METRIC_ORDER, msg.args):
                    self._values[metric.value] = min(max(float(value), 0.0), 1.0)
                self.updates += 1
            return
        if msg.address.startswith(PER_METRIC_PREFIX):
            name = msg.address[len(PER_METRIC_PREFIX):]
            try:
                key = MetricName(name).value
            except ValueError:
                self.ignored += 1
                return
            if len(msg.args) != 1 or not isinstance(msg.args[0], float):
                self.ignored += 1
                return
            with self._lock:
                self._values[key] = min(max(float(msg.args[0]), 0.0), 1.0)
                self.updates += 1
            return
        self.ignored += 1

    def snapshot(self) -> dict[str, float]:
        with self._lock:
            return dict(self._values)


class LiveSource(MetricSource):
    """Wraps a MetricMailbox; returns neutral values until data arrives."""

    mode = "live"

    def __init__(self, mailbox: MetricMailbox) -> None:
        super().__init__()
        self.mailbox = mailbox

    @property
    def has_signal(self) -> bool:
        return self.mailbox.updates > 0

    def next_sample(self, now: float) -> MetricSample:
        sample, _ = clamp_sample(now, **self.mailbox.snapshot())
        return sample
