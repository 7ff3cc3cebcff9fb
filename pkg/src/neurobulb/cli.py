"""Single entry point wiring all modules into run modes.

Modes:
  run          live loop: source -> mapping -> bridge (+ optional OSC input)
  render-still one frame to PNG
  render-seq   a deterministic frame sequence
  synth        one audio phrase from a metrics CSV to WAV
  replay       verify a recorded session reproduces its parameter trace
  osc-echo     debug listener that prints decoded OSC messages

All offline modes are deterministic for a given config + seed.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, EngineConfig, apply_overrides, dumps_toml, load_config


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="neurobulb",
        description="Neuro-adaptive audiovisual engine (headless).",
    )
    parser.add_argument("--version", action="version", version=__version__)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML config file")
    common.add_argument("--seed", type=int, help="override config seed")
    common.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="dotted config override, e.g. --set mapping.tau_visual=2.0",
    )
    common.add_argument(
        "--print-config", action="store_true", help="dump the effective config and exit"
    )

    sub = parser.add_subparsers(dest="mode", required=True)

    p = sub.add_parser("run", parents=[common], help="live control loop with bridge")
    p.add_argument("--osc-port", type=int, help="UDP port for live OSC input")
    p.add_argument("--bridge-port", type=int, help="bridge WebSocket/HTTP port")
    p.add_argument("--record", type=Path, help="record the session to this JSONL file")
    p.add_argument("--duration", type=float, help="stop after this many seconds")
    p.add_argument("--no-preview", action="store_true", help="disable preview frames")
    p.add_argument(
        "--audio-out", type=Path, help="write each completed phrase as WAV here"
    )

    p = sub.add_parser("render-still", parents=[common], help="render one PNG frame")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--size", default=None, help="WIDTHxHEIGHT, e.g. 128x128")
    p.add_argument("--power", type=float, help="fractal exponent, 2..10")
    p.add_argument("--bw", type=float, help="color index / blend weight, 0..1")
    p.add_argument("--variant", choices=("classic", "twisted"))
    p.add_argument("--time", type=float, default=0.0, help="scene time in seconds")

    p = sub.add_parser("render-seq", parents=[common], help="render a frame sequence")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--duration", type=float, required=True, help="seconds of sequence")
    p.add_argument("--fps", type=float, default=2.0)
    p.add_argument("--size", default=None, help="WIDTHxHEIGHT")
    p.add_argument("--variant", choices=("classic", "twisted"))

    p = sub.add_parser("synth", parents=[common], help="render one phrase to WAV")
    p.add_argument("--metrics-file", type=Path, required=True, help="replay CSV")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("replay", parents=[common], help="verify a recorded session")
    p.add_argument("--session-file", type=Path, required=True)

    p = sub.add_parser("osc-echo", parents=[common], help="print decoded OSC messages")
    p.add_argument("--osc-port", type=int)
    p.add_argument("--duration", type=float, help="stop after this many seconds")

    return parser


def _load_effective_config(args: argparse.Namespace) -> EngineConfig:
    cfg = load_config(args.config) if args.config else EngineConfig()
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        from .config import _parse_value

        overrides[key.strip()] = _parse_value(raw.strip(), 0)
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _parse_size(size: str | None, cfg: EngineConfig) -> EngineConfig:
    if size is None:
        return cfg
    try:
        w, h = (int(part) for part in size.lower().split("x"))
    except ValueError:
        raise ConfigError(f"--size expects WIDTHxHEIGHT, got {size!r}") from None
    return apply_overrides(cfg, {"render.width": w, "render.height": h})


def _cmd_run(args: argparse.Namespace, cfg: EngineConfig) -> int:
    from .bridge import BridgeServer
    from .engine import Engine

    if args.osc_port is not None:
        cfg = apply_overrides(cfg, {"osc_port": args.osc_port})
    if args.bridge_port is not None:
        cfg = apply_overrides(cfg, {"bridge.port": args.bridge_port})
    if args.record is not None:
        cfg = replace(cfg, record_path=str(args.record))
    if args.audio_out is not None:
        cfg = apply_overrides(cfg, {"audio.out_dir": str(args.audio_out)})

    engine = Engine(cfg)
    if cfg.source.mode == "live":
        engine.start_osc()
    server = BridgeServer(engine)
    engine.on_phrase_start = lambda phrase, _s: server.hub.publish_phrase(
        "start", {"index": phrase.index, "duration_s": phrase.duration_s}
    )
    engine.start()
    server.start()
    print(f"bridge on ws://{server.host}:{server.port}/ws (mode={engine.mode})")

    preview_stop = None
    if not args.no_preview:
        preview_stop = _start_preview_thread(engine, server, cfg)

    deadline = time.monotonic() + args.duration if args.duration else None
    try:
        while True:
            snapshot = engine.snapshots.read()
            if snapshot is not None:
                server.hub.publish_snapshot(snapshot)
            if deadline and time.monotonic() > deadline:
                break
            time.sleep(1.0 / cfg.source.tick_hz / 2.0)
    except KeyboardInterrupt:
        print("interrupted, shutting down")
    finally:
        if preview_stop is not None:
            preview_stop.set()
        server.stop()
        engine.stop()
    return 0


def _start_preview_thread(engine, server, cfg: EngineConfig):
    import threading

    from .bridge import encode_jpeg
    from .fractal import render_frame

    stop = threading.Event()
    size = cfg.bridge.preview_size
    rc = replace(cfg.render, width=size, height=size)

    def loop() -> None:
        interval = 1.0 / cfg.bridge.preview_hz
        while not stop.is_set():
            started = time.monotonic()
            snapshot = engine.snapshots.read()
            if snapshot is not None:
                img = render_frame(
                    snapshot.params,
                    rc,
                    snapshot.t,
                    de=cfg.de,
                    phase=snapshot.phase,
                    osc_depth=cfg.mapping.osc_depth,
                )
                jpeg = encode_jpeg(img, quality=cfg.bridge.frame_quality)
                server.hub.publish_frame(jpeg, size, size)
            elapsed = time.monotonic() - started
            stop.wait(max(interval - elapsed, 0.01))

    thread = threading.Thread(target=loop, name="preview", daemon=True)
    thread.start()
    return stop


def _cmd_render_still(args: argparse.Namespace, cfg: EngineConfig) -> int:
    from .fractal import render_frame, write_png
    from .mapping import FractalParams

    cfg = _parse_size(args.size, cfg)
    if args.variant:
        cfg = apply_overrides(cfg, {"de.variant": args.variant})
    params = FractalParams()
    if args.power is not None:
        params = replace(params, power=args.power)
    if args.bw is not None:
        params = replace(params, bw=args.bw)
    img = render_frame(params, cfg.render, args.time, de=cfg.de,
                       osc_depth=cfg.mapping.osc_depth)
    write_png(img, args.out)
    print(f"wrote {args.out} ({cfg.render.width}x{cfg.render.height})")
    return 0


def _cmd_render_seq(args: argparse.Namespace, cfg: EngineConfig) -> int:
    from .engine import Engine
    from .fractal import render_frame, write_png

    cfg = _parse_size(args.size, cfg)
    if args.variant:
        cfg = apply_overrides(cfg, {"de.variant": args.variant})
    engine = Engine(cfg)
    snapshots = engine.run_offline(args.duration)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stride = max(1, round(cfg.source.tick_hz / args.fps))
    count = 0
    for snapshot in snapshots[::stride]:
        img = render_frame(
            snapshot.params,
            cfg.render,
            snapshot.t,
            de=cfg.de,
            phase=snapshot.phase,
            osc_depth=cfg.mapping.osc_depth,
        )
        write_png(img, out / f"frame_{count:06d}.png")
        count += 1
    print(f"wrote {count} frames to {out}")
    return 0


def _cmd_synth(args: argparse.Namespace, cfg: EngineConfig) -> int:
    from .audio import plan_phrase, synth_phrase, write_wav
    from .engine import Engine

    cfg = apply_overrides(
        cfg,
        {"source.mode": "replay", "source.replay_path": str(args.metrics_file)},
    )
    engine = Engine(cfg)
    first = engine.tick()
    spec = plan_phrase(first.sample, cfg.seed, cfg.audio, cfg.mapping)

    # Drive the pipeline over the file for the phrase duration to get the
    # rendered power trace the synth brightness follows.
    times = [first.t]
    powers = [first.rendered_power]
    remaining = spec.duration_s - first.t
    for snapshot in engine.run_offline(remaining):
        times.append(snapshot.t)
        powers.append(snapshot.rendered_power)
    rate = cfg.audio.sample_rate
    buffer = synth_phrase(spec, (np.array(times), np.array(powers)), rate)
    write_wav(buffer, args.out, rate)
    print(
        f"wrote {args.out}: {spec.duration_s:.2f} s, "
        f"{len(buffer)} samples/channel at {rate} Hz"
    )
    return 0


def _cmd_replay(args: argparse.Namespace, cfg_args_present: bool,
                cfg: EngineConfig) -> int:
    from .config import config_from_dict
    from .session import ReplayMismatchError, load_session, replay_session

    record = load_session(args.session_file)
    if not cfg_args_present:
        # No explicit config given: replay under the recorded one.
        cfg = config_from_dict(record.header["config"])
    try:
        trace = replay_session(record, cfg)
    except ReplayMismatchError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    recorded = [e.payload for e in record.params_events()]
    if trace == recorded:
        print(f"replay OK: {len(trace)} parameter snapshots reproduced exactly")
        return 0
    mismatches = sum(1 for a, b in zip(trace, recorded) if a != b)
    print(
        f"replay FAILED: {mismatches} of {len(recorded)} snapshots differ "
        f"(replayed {len(trace)})",
        file=sys.stderr,
    )
    return 1


def _cmd_osc_echo(args: argparse.Namespace, cfg: EngineConfig) -> int:
    from .osc import OscListener

    port = args.osc_port if args.osc_port is not None else cfg.osc_port
    listener = OscListener(port, lambda msg: print(f"{msg.address} {list(msg.args)}"))
    print(f"listening for OSC on udp:{listener.port} (ctrl-c to stop)")
    try:
        if args.duration:
            time.sleep(args.duration)
        else:
            while True:
                time.sleep(1.0)
    except KeyboardInterrupt:
        pass
    finally:
        listener.close()
        print(
            f"received={listener.stats.received} delivered={listener.stats.delivered} "
            f"dropped={listener.stats.dropped}"
        )
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_effective_config(args)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    if args.print_config:
        print(dumps_toml(cfg), end="")
        return 0

    try:
        if args.mode == "run":
            return _cmd_run(args, cfg)
        if args.mode == "render-still":
            return _cmd_render_still(args, cfg)
        if args.mode == "render-seq":
            return _cmd_render_seq(args, cfg)
        if args.mode == "synth":
            return _cmd_synth(args, cfg)
        if args.mode == "replay":
            explicit = bool(args.config or args.seed is not None or args.set)
            return _cmd_replay(args, explicit, cfg)
        if args.mode == "osc-echo":
            return _cmd_osc_echo(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    parser.error(f"unknown mode {args.mode!r}")
    return 2


if __name__ == "__main__":
    sys.exit(main())
