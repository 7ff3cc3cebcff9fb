"""Domain types for the six EEG performance metrics.

Everything downstream (mapping, audio, session logs) works on one canonical
scale: each metric is a real in [0, 1]. Sources are responsible for
normalizing whatever their native range is before constructing samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum


class MetricName(str, Enum):
    ATTENTION = "attention"
    ENGAGEMENT = "engagement"
    EXCITEMENT = "excitement"
    INTEREST = "interest"
    RELAXATION = "relaxation"
    STRESS = "stress"


# Canonical ordering used on the wire, in CSV columns and in log payloads.
METRIC_ORDER: tuple[MetricName, ...] = tuple(MetricName)


class InvalidMetricError(ValueError):
    """A metric value or timestamp is non-finite or otherwise unusable."""

    def __init__(self, field: str, value: float) -> None:
        self.field = field
        self.value = value
        super().__init__(f"invalid value for {field!r}: {value!r}")


@dataclass(frozen=True)
class MetricSample:
    """One timestamped reading, every metric already normalized to [0, 1]."""

    t: float
    attention: float
    engagement: float
    excitement: float
    interest: float
    relaxation: float
    stress: float

    def value(self, name: MetricName | str) -> float:
        return float(getattr(self, MetricName(name).value))

    def values(self) -> tuple[float, ...]:
        """Metric values in canonical order (no timestamp)."""
        return tuple(getattr(self, m.value) for m in METRIC_ORDER)

    def as_dict(self) -> dict[str, float]:
        return {m.value: getattr(self, m.value) for m in METRIC_ORDER}


def clamp_sample(
    t: float,
    attention: float,
    engagement: float,
    excitement: float,
    interest: float,
    relaxation: float,
    stress: float,
) -> tuple[MetricSample, bool]:
    """Build a MetricSample, clamping each metric into [0, 1].

    Returns (sample, was_clamped). Non-finite inputs (NaN/inf) are rejected
    with an InvalidMetricError naming the offending field; the timestamp must
    be finite and non-negative.
    """
    if not math.isfinite(t) or t < 0.0:
        raise InvalidMetricError("t", t)
    raw = {
        "attention": attention,
        "engagement": engagement,
        "excitement": excitement,
        "interest": interest,
        "relaxation": relaxation,
        "stress": stress,
    }
    clamped = False
    out: dict[str, float] = {}
    for field, value in raw.items():
        v = float(value)
        if not math.isfinite(v):
            raise InvalidMetricError(field, v)
        if v < 0.0:
            v, clamped = 0.0, True
        elif v > 1.0:
            v, clamped = 1.0, True
        out[field] = v
    return MetricSample(t=float(t), **out), clamped


def inv(m: float) -> float:
    """Inverse influence of a unit-interval metric: inv(m) = 1 - m.

    Bounded and strictly decreasing, so "more of the metric" always means
    "less of the mapped quantity" without the singularity a reciprocal
    would have at zero. Involutive: inv(inv(m)) == m.
    """
    return 1.0 - m
