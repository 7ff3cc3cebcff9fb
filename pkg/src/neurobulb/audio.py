"""Interactive stereo FM synthesizer.

Each audio phrase opens with a bell strike and sustains a dense microtonal
cluster of 16 frequency-modulated oscillators. The phrase envelope unfolds
and folds (sin^2 window over the full duration), oscillator brightness
follows the live fractal power, and the phrase duration equals the visual
loop period, so sight and sound share one cycle.
"""

from __future__ import annotations

import math
import wave
from dataclasses import dataclass

import numpy as np

from .mapping import POWER_MAX, POWER_MIN, MappingConfig, map_targets
from .metrics import MetricSample

NUM_OSCILLATORS = 16
SAMPLE_RATE = 48000
SUPPORTED_RATES = (44100, 48000)

DURATION_MIN = 50.0
DURATION_MAX = 70.0


@dataclass(frozen=True)
class AudioConfig:
    """Cluster tuning and FM voicing constants; all config-exposed.

    out_dir enables per-phrase WAV export in run mode; device names a live
    output (requires the optional sounddevice backend; the engine degrades
    to offline rendering with a warning when it is unavailable).
    """

    out_dir: "str | None" = None
    device: "str | None" = None
    sample_rate: int = 48000
    base_freq_hz: float = 110.0
    cluster_semitones: float = 1.5   # spacing between adjacent carriers
    detune: float = 0.003            # max relative detune per oscillator
    bell_ratio: float = 1.4          # inharmonic modulator for the bell strike
    voice_ratio: float = 2.0         # harmonic modulator for sustained voices
    bell_index: float = 3.0          # base modulation index of the bell
    voice_index: float = 1.0
    bell_gain: float = 0.9
    voice_gain: float = 0.55
    bell_decay_frac: float = 0.125   # bell decay constant as fraction of duration
    voice_decay_frac: float = 0.5


DEFAULT_AUDIO = AudioConfig()


@dataclass(frozen=True)
class OscillatorSpec:
    carrier_hz: float
    mod_ratio: float
    mod_index: float
    onset_s: float
    decay_s: float
    pan: float   # -1 (left) .. +1 (right)
    gain: float  # 0 .. 1


@dataclass(frozen=True)
class PhraseSpec:
    """One phrase: duration, 16 oscillator voicings, detune seed."""

    duration_s: float
    oscillators: tuple[OscillatorSpec, ...]
    seed: int

    def __post_init__(self) -> None:
        if len(self.oscillators) != NUM_OSCILLATORS:
            raise ValueError(
                f"a phrase has exactly {NUM_OSCILLATORS} oscillators, "
                f"got {len(self.oscillators)}"
            )
        if not DURATION_MIN - 1e-9 <= self.duration_s <= DURATION_MAX + 1e-9:
            raise ValueError(
                f"duration must be in [{DURATION_MIN}, {DURATION_MAX}] s, "
                f"got {self.duration_s}"
            )


def plan_phrase(
    sample: MetricSample,
    seed: int,
    cfg: AudioConfig = DEFAULT_AUDIO,
    mapping_cfg: MappingConfig | None = None,
    duration_s: float | None = None,
) -> PhraseSpec:
    """Plan one phrase from a metric sample; deterministic in (sample, seed).

    The duration is the visual loop period (50..70 s by construction),
    derived from the sample's mapped targets unless the caller passes the
    engine's live (smoothed) period explicitly. Oscillator 0 is the bell:
    onset 0, inharmonic modulator, high index, fast decay. The rest form a
    cluster spaced cluster_semitones apart from base_freq_hz, slightly
    detuned, onsets staggered across the first quarter of the phrase, pans
    spread uniformly across the stereo field.
    """
    if duration_s is None:
        targets = map_targets(sample, mapping_cfg or MappingConfig())
        duration = 1.0 / targets.loop_freq_hz
    else:
        duration = duration_s
    rng = np.random.default_rng(seed)
    detunes = rng.uniform(-cfg.detune, cfg.detune, NUM_OSCILLATORS)

    oscillators = []
    for i in range(NUM_OSCILLATORS):
        carrier = float(
            cfg.base_freq_hz
            * 2.0 ** (i * cfg.cluster_semitones / 12.0)
            * (1.0 + detunes[i])
        )
        bell = i == 0
        oscillators.append(
            OscillatorSpec(
                carrier_hz=carrier,
                mod_ratio=cfg.bell_ratio if bell else cfg.voice_ratio,
                mod_index=cfg.bell_index if bell else cfg.voice_index,
                onset_s=(i / NUM_OSCILLATORS) * duration / 4.0,
                decay_s=duration * (cfg.bell_decay_frac if bell else cfg.voice_decay_frac),
                pan=-1.0 + 2.0 * i / (NUM_OSCILLATORS - 1),
                gain=cfg.bell_gain if bell else cfg.voice_gain,
            )
        )
    return PhraseSpec(duration_s=duration, oscillators=tuple(oscillators), seed=seed)


def synth_phrase(
    spec: PhraseSpec,
    power_trace: tuple[np.ndarray, np.ndarray],
    sample_rate: int = SAMPLE_RATE,
) -> np.ndarray:
    """Render a phrase to a stereo float buffer in [-1, 1].

    power_trace is (times, powers): the fractal power over the phrase,
    linearly interpolated onto the sample grid. Each oscillator i plays
    gain * window(t) * exp(-(t - onset)/decay)
         * sin(2 pi f t + beta(t) * sin(2 pi f ratio t))      for t >= onset,
    where window(t) = sin^2(pi t / duration) is the unfold/fold envelope and
    beta(t) = index * (power(t) - 2) / 8 couples brightness to the fractal.
    Equal-power stereo panning, master gain 1/16, hard clip guard at +-1.

    Returns an (n, 2) float64 array with n = round(duration * sample_rate).
    """
    if sample_rate not in SUPPORTED_RATES:
        raise ValueError(f"sample_rate must be one of {SUPPORTED_RATES}")
    times, powers = power_trace
    times = np.asarray(times, dtype=np.float64)
    powers = np.asarray(powers, dtype=np.float64)
    if times.size == 0 or powers.size == 0:
        raise ValueError("power_trace must not be empty")
    if times.shape != powers.shape:
        raise ValueError("power_trace times and values must have equal length")

    n = round(spec.duration_s * sample_rate)
    t = np.arange(n, dtype=np.float64) / sample_rate
    power_t = np.interp(t, times, powers)
    beta_scale = (power_t - POWER_MIN) / (POWER_MAX - POWER_MIN)
    window = np.sin(math.pi * t / spec.duration_s) ** 2

    left = np.zeros(n)
    right = np.zeros(n)
    two_pi = 2.0 * math.pi
    for osc in spec.oscillators:
        if osc.gain == 0.0:
            continue
        active = t >= osc.onset_s
        tt = t[active]
        envelope = window[active] * np.exp(-(tt - osc.onset_s) / osc.decay_s)
        beta = osc.mod_index * beta_scale[active]
        y = (
            osc.gain
            * envelope
            * np.sin(two_pi * osc.carrier_hz * tt
                     + beta * np.sin(two_pi * osc.carrier_hz * osc.mod_ratio * tt))
        )
        angle = (osc.pan + 1.0) * math.pi / 4.0
        left[active] += y * math.cos(angle)
        right[active] += y * math.sin(angle)

    buffer = np.stack([left, right], axis=1) / NUM_OSCILLATORS
    np.clip(buffer, -1.0, 1.0, out=buffer)
    return buffer


def constant_power_trace(duration_s: float, power: float) -> tuple[np.ndarray, np.ndarray]:
    return np.array([0.0, duration_s]), np.array([power, power])


def write_wav(buffer: np.ndarray, path, sample_rate: int = SAMPLE_RATE) -> None:
    """Write a stereo float buffer as 16-bit PCM little-endian RIFF/WAVE."""
    buf = np.asarray(buffer, dtype=np.float64)
    if buf.size == 0:
        raise ValueError("refusing to write an empty buffer")
    if buf.ndim != 2 or buf.shape[1] != 2:
        raise ValueError(f"expected an (n, 2) stereo buffer, got shape {buf.shape}")
    pcm = quantize_pcm16(buf)
    with wave.open(str(path), "wb") as wav:
        wav.setnchannels(2)
        wav.setsampwidth(2)
        wav.setframerate(sample_rate)
        wav.writeframes(pcm.tobytes())


def read_wav(path) -> tuple[np.ndarray, int]:
    """Read a 16-bit PCM stereo WAV back to (float buffer, sample rate)."""
    with wave.open(str(path), "rb") as wav:
        if wav.getsampwidth() != 2 or wav.getnchannels() != 2:
            raise ValueError("expected 16-bit stereo PCM")
        rate = wav.getframerate()
        raw = wav.readframes(wav.getnframes())
    pcm = np.frombuffer(raw, dtype="<i2").reshape(-1, 2)
    return pcm.astype(np.float64) / 32767.0, rate


def quantize_pcm16(buffer: np.ndarray) -> np.ndarray:
    """Quantize floats in [-1, 1] to interleaved little-endian int16."""
    clipped = np.clip(buffer, -1.0, 1.0)
    return np.clip(np.rint(clipped * 32767.0), -32768, 32767).astype("<i2")


def open_live_sink(device_name: str | None = None):
    """Try to open a live audio output; return None when unavailable.

    Live playback needs an optional backend (sounddevice) and an output
    device; headless deployments fall back to offline rendering. The caller
    is expected to warn and degrade when this returns None.
    """
    try:
        import sounddevice  # type: ignore[import-not-found]
    except ImportError:
        return None
    try:
        stream = sounddevice.OutputStream(
            samplerate=SAMPLE_RATE, channels=2, device=device_name
        )
        stream.start()
        return stream
    except Exception:
        return None
