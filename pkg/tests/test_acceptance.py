"""Acceptance suite: one test per release criterion, at its stated tolerance.

Each test prints a single PASS line with the measured numbers (run with
`pytest -s tests/test_acceptance.py` to see them); a failing criterion fails
its test. Sampling seeds are fixed so the suite is reproducible.
"""

import hashlib
import math
import time
from pathlib import Path

import numpy as np
import pytest

from neurobulb.audio import constant_power_trace, plan_phrase, synth_phrase
from neurobulb.config import EngineConfig
from neurobulb.engine import Engine
from neurobulb.fractal import (
    DEConfig,
    RenderConfig,
    mandelbulb_de_batch,
    march,
    render_frame,
)
from neurobulb.mapping import (
    MappingConfig,
    FractalParams,
    SmoothingState,
    advance_loop_phase,
    map_targets,
    oscillated_power,
    smooth_step,
)
from neurobulb.metrics import clamp_sample
from neurobulb.osc import OscDecodeError, OscMessage, decode, decode_packet, encode
from neurobulb.session import load_session, replay_session

GOLDEN_DIR = Path(__file__).parent / "golden"

FIELDS = ("attention", "engagement", "excitement", "interest", "relaxation", "stress")


def random_samples(rng, count):
    values = rng.uniform(0.0, 1.0, (count, 6))
    return [clamp_sample(0.0, *row)[0] for row in values]


def report(name: str, detail: str) -> None:
    print(f"[PASS] {name}: {detail}")


def test_fractal_power_range():
    rng = np.random.default_rng(2024)
    started = time.perf_counter()
    worst_low, worst_high = math.inf, -math.inf
    for sample in random_samples(rng, 10_000):
        params = map_targets(sample)
        phase, offset = advance_loop_phase(
            rng.uniform(0, 1), params.loop_freq_hz, rng.uniform(0, 1)
        )
        rendered = oscillated_power(params.power, offset)
        for value in (params.power, rendered):
            worst_low = min(worst_low, value)
            worst_high = max(worst_high, value)
        assert 2.0 <= params.power <= 10.0
        assert 2.0 <= rendered <= 10.0
    elapsed = time.perf_counter() - started
    assert elapsed < 1.0, f"power-range sweep took {elapsed:.2f}s (budget 1s)"
    report(
        "fractal power range",
        f"10,000 samples, mapped+rendered power in [{worst_low:.3f}, {worst_high:.3f}] "
        f"⊆ [2, 10], {elapsed * 1000:.0f} ms",
    )


def test_phrase_duration_band_and_endpoints():
    rng = np.random.default_rng(2025)
    durations = []
    for i, sample in enumerate(random_samples(rng, 1_000)):
        spec = plan_phrase(sample, seed=i)
        durations.append(spec.duration_s)
        assert 50.0 <= spec.duration_s <= 70.0
    calm, _ = clamp_sample(0, 1.0, 1.0, 0.0, 1.0, 1.0, 0.0)
    excited, _ = clamp_sample(0, 0.5, 0.5, 1.0, 0.5, 0.5, 1.0)
    d_calm = plan_phrase(calm, seed=0).duration_s
    d_excited = plan_phrase(excited, seed=0).duration_s
    assert abs(d_calm - 50.0) <= 0.01
    assert abs(d_excited - 70.0) <= 0.01
    report(
        "phrase duration",
        f"1,000 phrases in [{min(durations):.2f}, {max(durations):.2f}] s ⊆ [50, 70]; "
        f"all-calm {d_calm:.4f} s, all-excited/stressed {d_excited:.4f} s",
    )


def test_oscillator_count():
    rng = np.random.default_rng(2026)
    for i, sample in enumerate(random_samples(rng, 1_000)):
        assert len(plan_phrase(sample, seed=i).oscillators) == 16
    report("oscillator count", "1,000 phrase specs, every one has exactly 16 oscillators")


def test_de_soundness_oracle():
    rng = np.random.default_rng(2027)
    started = time.perf_counter()
    total_pairs = 0
    for variant, bw in (("classic", 0.0), ("twisted", 0.5)):
        for power in (2.0, 4.0, 8.0):
            cfg = DEConfig(power=power, variant=variant, bw=bw, max_iter=12)
            kept = 0
            while kept < 10_000:
                p = rng.uniform(-1.5, 1.5, (100_000, 3))
                q = rng.uniform(-1.5, 1.5, (100_000, 3))
                dp, _ = mandelbulb_de_batch(p, cfg)
                mask = (dp > 0.0) & (np.linalg.norm(p - q, axis=1) < 0.9 * dp)
                take = q[mask][: 10_000 - kept]
                dq, _ = mandelbulb_de_batch(take, cfg)
                inside = int((dq == 0.0).sum())
                assert inside == 0, (
                    f"{variant} power={power}: {inside} inside-classification violations"
                )
                kept += len(take)
            total_pairs += kept
    elapsed = time.perf_counter() - started
    assert elapsed < 60.0, f"DE soundness oracle took {elapsed:.1f}s (budget 60s)"
    report(
        "DE soundness oracle",
        f"{total_pairs} pairs over classic/twisted × power 2/4/8, "
        f"0 violations, {elapsed:.1f} s",
    )


def test_marcher_oracle():
    def sphere_de(p):
        return math.sqrt(p[0] ** 2 + p[1] ** 2 + p[2] ** 2) - 1.0

    rc = RenderConfig(
        surface_epsilon=1e-4,
        step_safety=1.0,
        max_march_steps=512,
        max_ray_distance=10.0,
    )
    rng = np.random.default_rng(2028)
    worst = 0.0
    for _ in range(1_000):
        origin = rng.normal(size=3)
        origin = 3.0 * origin / np.linalg.norm(origin)
        target = rng.normal(size=3)
        target = target * rng.uniform(0, 0.8) ** (1 / 3) / np.linalg.norm(target)
        direction = target - origin
        direction /= np.linalg.norm(direction)
        b = float(np.dot(origin, direction))
        c = float(np.dot(origin, origin) - 1.0)
        t_exact = -b - math.sqrt(b * b - c)
        hit = march(tuple(origin), tuple(direction), sphere_de, rc)
        assert hit.hit
        error = abs(hit.distance - t_exact)
        assert error < 1e-3
        worst = max(worst, error)
    report("marcher oracle", f"1,000 random rays, worst |error| = {worst:.2e} < 1e-3")


def test_mapping_monotonicity():
    rng = np.random.default_rng(2029)
    violations = 0
    for _ in range(1_000):
        base_values = rng.uniform(0.0, 0.9, 6)
        base, _ = clamp_sample(0.0, *base_values)
        reference = map_targets(base)

        def perturbed(field):
            values = dict(zip(FIELDS, base_values))
            values[field] = values[field] + 0.1
            return map_targets(clamp_sample(0.0, **values)[0])

        if not perturbed("attention").power > reference.power:
            violations += 1
        if not perturbed("excitement").power < reference.power:
            violations += 1
        if not perturbed("excitement").loop_freq_hz < reference.loop_freq_hz:
            violations += 1
        if not perturbed("stress").loop_freq_hz < reference.loop_freq_hz:
            violations += 1
    assert violations == 0
    report(
        "mapping monotonicity",
        "1,000 samples × {attention↑power, excitement↓power, "
        "excitement↓loop, stress↓loop}, 0 violations",
    )


def test_smoothing_closed_form_and_slew_cap():
    cfg = MappingConfig()
    current = FractalParams(power=3.0, color_mix=(0.2, 0.2, 0.2), bw=0.2,
                            dpower_per_s=1e6, loop_freq_hz=1 / 70)
    target = FractalParams(power=9.0, color_mix=(0.9, 0.9, 0.9), bw=0.9,
                           dpower_per_s=1e6, loop_freq_hz=1 / 50)
    state = SmoothingState(current=current, target=target, cfg=cfg)
    out = smooth_step(state, cfg.tau_visual)
    closed_form = 9.0 + (3.0 - 9.0) * math.exp(-1.0)
    error = abs(out.power - closed_form)
    assert error <= 1e-9

    # ten simulated minutes of agitated -> calm pursuit at 10 Hz
    agitated, _ = clamp_sample(0, 0.35, 0.5, 0.8, 0.5, 0.5, 0.75)
    calm, _ = clamp_sample(0, 0.7, 0.5, 0.2, 0.5, 0.5, 0.15)
    state = SmoothingState(
        current=map_targets(agitated), target=map_targets(calm), cfg=cfg
    )
    dt = 0.1
    worst_excess = -math.inf
    for _ in range(6_000):
        cap = state.current.dpower_per_s * dt
        before = state.current.power
        after = smooth_step(state, dt).power
        worst_excess = max(worst_excess, abs(after - before) - cap)
    assert worst_excess <= 1e-12
    report(
        "smoothing closed form",
        f"dt=τ step error {error:.2e} ≤ 1e-9; 6,000-tick transition, "
        f"max |Δpower|−cap = {worst_excess:.2e} ≤ 0",
    )


def test_osc_golden_vectors_and_fuzz():
    golden_met = bytes.fromhex(
        "2f6d6574000000002c66666666666600" + "3f000000" * 6
    )
    golden_a = bytes.fromhex("2f6100002c000000")
    msg_met = OscMessage("/met", (0.5,) * 6)
    msg_a = OscMessage("/a", ())
    assert encode(msg_met) == golden_met and len(golden_met) == 40
    assert encode(msg_a) == golden_a and len(golden_a) == 8
    assert decode(golden_met) == msg_met
    assert decode(golden_a) == msg_a

    rng = np.random.default_rng(2030)
    alphabet = "abcdefghijklmnopqrstuvwxyzXYZ0123456789_-"
    for _ in range(10_000):
        address = "/" + "".join(
            rng.choice(list(alphabet), size=rng.integers(1, 12))
        )
        args = []
        for _ in range(rng.integers(0, 6)):
            kind = rng.integers(0, 3)
            if kind == 0:
                args.append(float(np.float32(rng.normal() * 100)))
            elif kind == 1:
                args.append(int(rng.integers(-(2**31), 2**31)))
            else:
                args.append("".join(rng.choice(list(alphabet), size=rng.integers(0, 9))))
        message = OscMessage(address, tuple(args))
        wire = encode(message)
        assert len(wire) % 4 == 0
        assert decode(wire) == message

    crashes = 0
    for _ in range(10_000):
        blob = rng.integers(0, 256, size=int(rng.integers(0, 64)), dtype=np.uint8)
        try:
            decode_packet(blob.tobytes())
        except OscDecodeError:
            pass
        except Exception:  # anything unstructured counts as a crash
            crashes += 1
    assert crashes == 0
    report(
        "OSC golden vectors",
        "40-byte and 8-byte vectors bit-exact; 10,000 round-trips; "
        "10,000-packet fuzz, 0 crashes",
    )


def test_audio_properties():
    neutral, _ = clamp_sample(0, *(0.5,) * 6)
    spec = plan_phrase(neutral, seed=77)

    rng = np.random.default_rng(2031)
    times = np.linspace(0.0, spec.duration_s, 40)
    extreme_traces = [
        constant_power_trace(spec.duration_s, 2.0),
        constant_power_trace(spec.duration_s, 10.0),
        (times, np.where(rng.standard_normal(40) > 0, 10.0, 2.0)),
    ]
    peak = 0.0
    for trace in extreme_traces:
        buf = synth_phrase(spec, trace, 48000)
        peak = max(peak, float(np.abs(buf).max()))
    assert peak <= 1.0

    def centroid(buf):
        mono = buf.mean(axis=1)
        mag = np.abs(np.fft.rfft(mono))
        freqs = np.fft.rfftfreq(len(mono), 1 / 48000)
        return float((freqs * mag).sum() / mag.sum())

    low = synth_phrase(spec, constant_power_trace(spec.duration_s, 2.0), 48000)
    high = synth_phrase(spec, constant_power_trace(spec.duration_s, 10.0), 48000)
    ratio = centroid(high) / centroid(low)
    assert ratio >= 1.10

    again = synth_phrase(spec, constant_power_trace(spec.duration_s, 10.0), 48000)
    assert (high == again).all()
    report(
        "audio properties",
        f"peak |sample| = {peak:.3f} ≤ 1.0; centroid ratio p10/p2 = {ratio:.3f} ≥ 1.10; "
        "re-render bit-identical",
    )


def test_end_to_end_replay(tmp_path):
    started = time.perf_counter()
    path = tmp_path / "calm-2min.fbsession.jsonl"
    cfg = EngineConfig(seed=42, record_path=str(path))  # synthetic calm profile
    engine = Engine(cfg)
    engine.run_offline(120.0)
    engine.stop_recording()

    record = load_session(path)
    trace = replay_session(record, cfg)
    recorded = [event.payload for event in record.params_events()]
    assert len(trace) == 1200
    assert trace == recorded  # bit-equal after canonical 1e-9 rounding
    elapsed = time.perf_counter() - started
    assert elapsed < 30.0, f"record+replay took {elapsed:.1f}s (budget 30s)"
    report(
        "end-to-end replay",
        f"2-minute synthetic-calm session, 1,200 parameter snapshots "
        f"reproduced bit-equal in {elapsed:.1f} s",
    )


def test_render_determinism_and_golden_hash():
    params = FractalParams(power=8.0)
    rc = RenderConfig(width=128, height=128)
    first = render_frame(params, rc, 0.0, de=DEConfig(variant="classic"))
    second = render_frame(params, rc, 0.0, de=DEConfig(variant="classic"))
    assert (first == second).all()

    digest = hashlib.sha256(first.tobytes()).hexdigest()
    GOLDEN_DIR.mkdir(exist_ok=True)
    golden_path = GOLDEN_DIR / "render_128x128_p8_classic.sha256"
    if golden_path.exists():
        stored = golden_path.read_text().strip()
        assert digest == stored, (
            f"render hash {digest} != stored golden {stored}; "
            "delete the golden file to re-prime on a new platform"
        )
        source = "matches stored golden"
    else:
        golden_path.write_text(digest + "\n")
        source = "golden primed"
    report(
        "render determinism",
        f"two 128×128 renders byte-identical; sha256 {digest[:16]}… ({source})",
    )
