"""Metric-to-parameter mapping and gradual parameter pursuit.

This is the heart of the adaptive loop: each metric sample is mapped onto
target render/audio parameters through fixed affine relations, and the live
parameters chase those targets with exponential smoothing plus a hard slew
cap on the fractal power. A slow triangle oscillation rides on top of the
smoothed power so the shape keeps breathing even when the metrics are still.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .metrics import MetricSample, inv

POWER_MIN = 2.0
POWER_MAX = 10.0

# Full-cycle frequency bounds: one loop takes between 50 and 70 seconds.
F_MIN = 1.0 / 70.0
F_MAX = 1.0 / 50.0


@dataclass(frozen=True)
class MappingConfig:
    """Constants the mapping formulas leave open; all config-exposed.

    f_min/f_max may be narrowed but must stay inside the canonical
    50..70 s loop-period band, which the parameter invariants pin down.
    """

    k_dp: float = 0.5          # power slew gain, power-units/s at inv(excitement)=1
    tau_visual: float = 4.0    # smoothing time constant for appearance params, s
    tau_freq: float = 10.0     # smoothing time constant for the loop frequency, s
    osc_depth: float = 1.5     # triangle oscillation depth on power, power-units
    f_min: float = F_MIN       # slowest full-cycle frequency, Hz
    f_max: float = F_MAX       # fastest full-cycle frequency, Hz

    def __post_init__(self) -> None:
        if not (F_MIN - 1e-12 <= self.f_min < self.f_max <= F_MAX + 1e-12):
            raise ValueError(
                f"loop band [{self.f_min}, {self.f_max}] Hz must lie within "
                f"[{F_MIN:.6f}, {F_MAX:.6f}] Hz (50..70 s periods)"
            )
        for name in ("k_dp", "tau_visual", "tau_freq", "osc_depth"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


DEFAULT_MAPPING = MappingConfig()


@dataclass(frozen=True)
class FractalParams:
    """Instantaneous render-control state.

    Construction clamps every field into its documented range, so arithmetic
    on params (smoothing, interpolation) can never escape the invariants.
    """

    power: float = 6.0
    color_mix: tuple[float, float, float] = (0.5, 0.5, 0.5)
    bw: float = 0.5
    dpower_per_s: float = 0.25
    loop_freq_hz: float = (F_MIN + F_MAX) / 2.0

    def __post_init__(self) -> None:
        clamp = lambda v, lo, hi: min(max(float(v), lo), hi)  # noqa: E731
        object.__setattr__(self, "power", clamp(self.power, POWER_MIN, POWER_MAX))
        object.__setattr__(
            self, "color_mix", tuple(clamp(c, 0.0, 1.0) for c in self.color_mix)
        )
        object.__setattr__(self, "bw", clamp(self.bw, 0.0, 1.0))
        object.__setattr__(self, "dpower_per_s", max(float(self.dpower_per_s), 0.0))
        object.__setattr__(self, "loop_freq_hz", clamp(self.loop_freq_hz, F_MIN, F_MAX))

    @property
    def loop_period_s(self) -> float:
        return 1.0 / self.loop_freq_hz

    def as_dict(self) -> dict:
        return {
            "power": self.power,
            "color_mix": list(self.color_mix),
            "bw": self.bw,
            "dpower_per_s": self.dpower_per_s,
            "loop_freq_hz": self.loop_freq_hz,
        }


def map_targets(s: MetricSample, cfg: MappingConfig = DEFAULT_MAPPING) -> FractalParams:
    """Map one metric sample onto target parameters.

    power        rises with attention, falls with excitement
    red          falls with excitement and engagement
    green        falls with attention and stress
    blue         falls with relaxation and interest
    bw           tied to the blue mix
    dpower/s     falls with excitement (slew cap on power)
    loop freq    falls with excitement and stress (agitation slows the cycle)
    """
    power = POWER_MIN + (POWER_MAX - POWER_MIN) * (s.attention + inv(s.excitement)) / 2.0
    red = (inv(s.excitement) + inv(s.engagement)) / 2.0
    green = (inv(s.attention) + inv(s.stress)) / 2.0
    blue = (inv(s.relaxation) + inv(s.interest)) / 2.0
    loop = cfg.f_min + (cfg.f_max - cfg.f_min) * (inv(s.excitement) + inv(s.stress)) / 2.0
    return FractalParams(
        power=power,
        color_mix=(red, green, blue),
        bw=blue,
        dpower_per_s=cfg.k_dp * inv(s.excitement),
        loop_freq_hz=loop,
    )


@dataclass
class SmoothingState:
    """Live parameters plus the target they are being pulled toward."""

    current: FractalParams
    target: FractalParams
    cfg: MappingConfig = field(default_factory=MappingConfig)

    def retarget(self, target: FractalParams) -> None:
        self.target = target


def _pursue(current: float, target: float, k: float) -> float:
    return target + (current - target) * k


def smooth_step(state: SmoothingState, dt: float) -> FractalParams:
    """Advance the smoothed parameters by dt seconds.

    Every scalar follows p_new = target + (p_current - target) * exp(-dt/tau);
    appearance parameters use tau_visual, the loop frequency the slower
    tau_freq. The power step is additionally capped by the slew limit that is
    in effect when the step starts (current.dpower_per_s, power-units/s).
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    cur, tgt, cfg = state.current, state.target, state.cfg
    kv = math.exp(-dt / cfg.tau_visual)
    kf = math.exp(-dt / cfg.tau_freq)

    power = _pursue(cur.power, tgt.power, kv)
    cap = cur.dpower_per_s * dt
    delta = power - cur.power
    if abs(delta) > cap:
        power = cur.power + math.copysign(cap, delta)

    state.current = FractalParams(
        power=power,
        color_mix=tuple(
            _pursue(c, t, kv) for c, t in zip(cur.color_mix, tgt.color_mix)
        ),
        bw=_pursue(cur.bw, tgt.bw, kv),
        dpower_per_s=_pursue(cur.dpower_per_s, tgt.dpower_per_s, kv),
        loop_freq_hz=_pursue(cur.loop_freq_hz, tgt.loop_freq_hz, kf),
    )
    return state.current


def triangle_wave(phase: float) -> float:
    """Triangle in [-1, 1] over phase in [0, 1): -1 at 0, peak +1 at 0.5."""
    return 1.0 - 4.0 * abs(phase % 1.0 - 0.5)


def advance_loop_phase(
    phase: float, loop_freq_hz: float, dt: float, depth: float = DEFAULT_MAPPING.osc_depth
) -> tuple[float, float]:
    """Advance the loop phase and return (new_phase, power offset).

    The offset is depth * triangle(new_phase); callers add it to the smoothed
    power and clamp via oscillated_power().
    """
    new_phase = (phase + loop_freq_hz * dt) % 1.0
    return new_phase, depth * triangle_wave(new_phase)


def oscillated_power(smoothed_power: float, offset: float) -> float:
    """Rendered power: smoothed power plus oscillation, clamped to [2, 10]."""
    return min(max(smoothed_power + offset, POWER_MIN), POWER_MAX)


@dataclass
class ParamPipeline:
    """Sample-to-parameters step shared by the live loop and session replay.

    Keeping this in one place is what makes record/replay bit-exact: both
    paths run the identical float operations in the identical order. The
    first sample initializes the smoothed state at its own target (no
    startup transient); every step advances the loop phase by dt.
    """

    cfg: MappingConfig = field(default_factory=MappingConfig)
    state: SmoothingState | None = None
    phase: float = 0.0

    def step(self, sample: MetricSample, dt: float) -> tuple[FractalParams, float, float]:
        """Advance by dt seconds; returns (params, rendered_power, phase)."""
        target = map_targets(sample, self.cfg)
        if self.state is None:
            self.state = SmoothingState(current=target, target=target, cfg=self.cfg)
            params = target
        elif dt > 0.0:
            self.state.retarget(target)
            params = smooth_step(self.state, dt)
        else:
            self.state.retarget(target)
            params = self.state.current
        self.phase, offset = advance_loop_phase(
            self.phase, params.loop_freq_hz, dt, depth=self.cfg.osc_depth
        )
        return params, oscillated_power(params.power, offset), self.phase
