"""Local operator service: engine state out, operator commands in.

Serves a WebSocket at /ws and a health probe at /healthz, loopback-only by
default. Text frames carry JSON control/state messages (hello, snapshot,
metrics, params, phrase, ack, error); preview images travel as binary
frames: a 2-byte big-endian header length, a JSON header (type/seq/encoding/
dimensions), then the JPEG payload. Sequence numbers are allocated globally
at publish time, so a slow client that had frames dropped sees gaps while
metrics and params keep flowing.
"""

from __future__ import annotations

import asyncio
import io
import json
import struct
import threading
from contextlib import asynccontextmanager
from dataclasses import dataclass
from typing import Optional

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from . import __version__
from .engine import Engine, EngineSnapshot, metrics_payload
from .session import params_payload

PROTOCOL_VERSION = 1

# Per-client outbound queue: frames are dropped beyond this depth, control
# messages keep queueing; a client that stops reading entirely is dropped.
FRAME_QUEUE_LIMIT = 8
CLIENT_QUEUE_HARD_LIMIT = 4096


def encode_frame_message(seq: int, jpeg: bytes, width: int, height: int) -> bytes:
    header = json.dumps(
        {
            "type": "frame",
            "seq": seq,
            "encoding": "jpeg",
            "width": width,
            "height": height,
        }
    ).encode()
    return struct.pack(">H", len(header)) + header + jpeg


def decode_frame_message(data: bytes) -> tuple[dict, bytes]:
    (header_len,) = struct.unpack_from(">H", data, 0)
    header = json.loads(data[2 : 2 + header_len])
    return header, data[2 + header_len :]


def encode_jpeg(image: np.ndarray, quality: int = 80) -> bytes:
    from PIL import Image

    out = io.BytesIO()
    Image.fromarray(image, mode="RGB").save(out, format="JPEG", quality=quality)
    return out.getvalue()


@dataclass(eq=False)
class _Client:
    queue: "asyncio.Queue[tuple[str, object]]"
    frames_dropped: int = 0


class BridgeHub:
    """Fan-out of engine snapshots to websocket clients.

    publish_* methods are thread-safe: the control loop (a plain thread)
    hands messages to the service event loop, which owns all client queues.
    """

    def __init__(self, engine: Engine) -> None:
        self.engine = engine
        self.loop: Optional[asyncio.AbstractEventLoop] = None
        self._clients: set[_Client] = set()
        self._seq = 0
        self._seq_lock = threading.Lock()
        self._last_snapshot_tick = -1

    def next_seq(self) -> int:
        with self._seq_lock:
            self._seq += 1
            return self._seq

    # -- called from the event loop -----------------------------------------

    def attach(self) -> _Client:
        client = _Client(queue=asyncio.Queue())
        self._clients.add(client)
        return client

    def detach(self, client: _Client) -> None:
        self._clients.discard(client)

    def _dispatch(self, kind: str, message) -> None:
        is_frame = kind == "binary"
        for client in list(self._clients):
            if client.queue.qsize() >= CLIENT_QUEUE_HARD_LIMIT:
                self.detach(client)  # reader is gone; stop buffering for it
                continue
            if is_frame and client.queue.qsize() >= FRAME_QUEUE_LIMIT:
                client.frames_dropped += 1
                continue
            client.queue.put_nowait((kind, message))

    # -- called from any thread ----------------------------------------------

    def publish_json(self, payload: dict) -> None:
        if self.loop is None:
            return
        self.loop.call_soon_threadsafe(self._dispatch, "text", json.dumps(payload))

    def publish_snapshot(self, snapshot: EngineSnapshot) -> None:
        if snapshot.tick == self._last_snapshot_tick:
            return
        self._last_snapshot_tick = snapshot.tick
        self.publish_json(
            {
                "type": "metrics",
                "seq": self.next_seq(),
                "payload": metrics_payload(snapshot),
            }
        )
        self.publish_json(
            {
                "type": "params",
                "seq": self.next_seq(),
                "payload": params_payload(
                    snapshot.t,
                    snapshot.params,
                    snapshot.rendered_power,
                    snapshot.phase,
                ),
            }
        )

    def publish_frame(self, jpeg: bytes, width: int, height: int) -> None:
        if self.loop is None:
            return
        message = encode_frame_message(self.next_seq(), jpeg, width, height)
        self.loop.call_soon_threadsafe(self._dispatch, "binary", message)

    def publish_phrase(self, event: str, payload: dict) -> None:
        self.publish_json(
            {
                "type": "phrase",
                "seq": self.next_seq(),
                "payload": {"event": event, **payload},
            }
        )

    def snapshot_message(self) -> dict:
        snapshot = self.engine.snapshots.read()
        payload: dict = {"mode": self.engine.mode, "recording": self.engine.recording}
        if snapshot is not None:
            payload["metrics"] = metrics_payload(snapshot)
            payload["params"] = params_payload(
                snapshot.t, snapshot.params, snapshot.rendered_power, snapshot.phase
            )
        return {"type": "snapshot", "seq": self.next_seq(), "payload": payload}


def create_app(engine: Engine, hub: Optional[BridgeHub] = None) -> FastAPI:
    the_hub = hub or BridgeHub(engine)

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        the_hub.loop = asyncio.get_running_loop()
        yield

    app = FastAPI(title="neurobulb bridge", version=__version__, lifespan=lifespan)
    app.state.hub = hub = the_hub

    @app.get("/healthz")
    async def healthz() -> dict:
        snapshot = engine.snapshots.read()
        return {
            "status": "ok",
            "engine_version": __version__,
            "protocol": PROTOCOL_VERSION,
            "mode": engine.mode,
            "tick": snapshot.tick if snapshot else 0,
            "t": snapshot.t if snapshot else 0.0,
            "clients": len(hub._clients),
        }

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket) -> None:
        await ws.accept()
        client = hub.attach()
        await ws.send_text(
            json.dumps(
                {
                    "type": "hello",
                    "seq": hub.next_seq(),
                    "payload": {
                        "protocol": PROTOCOL_VERSION,
                        "engine_version": __version__,
                    },
                }
            )
        )
        await ws.send_text(json.dumps(hub.snapshot_message()))

        async def pump_outbound() -> None:
            while True:
                kind, message = await client.queue.get()
                if kind == "text":
                    await ws.send_text(message)  # type: ignore[arg-type]
                else:
                    await ws.send_bytes(message)  # type: ignore[arg-type]

        pump = asyncio.create_task(pump_outbound())
        try:
            while True:
                raw = await ws.receive_text()
                response = await _handle_command(engine, hub, raw)
                await ws.send_text(json.dumps(response))
        except WebSocketDisconnect:
            pass
        finally:
            pump.cancel()
            hub.detach(client)

    return app


async def _handle_command(engine: Engine, hub: BridgeHub, raw: str) -> dict:
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        return {
            "type": "error",
            "seq": hub.next_seq(),
            "payload": {"error": f"invalid JSON: {exc}"},
        }
    if not isinstance(data, dict) or data.get("type") != "command":
        return {
            "type": "error",
            "seq": hub.next_seq(),
            "payload": {"error": "expected {'type': 'command', ...}", "id": None},
        }
    command_id = data.get("id")
    payload = data.get("payload")
    if not isinstance(payload, dict):
        return {
            "type": "error",
            "seq": hub.next_seq(),
            "payload": {"error": "command payload must be an object", "id": command_id},
        }
    result = await asyncio.to_thread(engine.submit_command, payload)
    if result.get("ok"):
        return {
            "type": "ack",
            "seq": hub.next_seq(),
            "payload": {"id": command_id, "state": result["state"]},
        }
    return {
        "type": "error",
        "seq": hub.next_seq(),
        "payload": {"id": command_id, "error": result.get("error", "unknown error")},
    }


class BridgeServer:
    """Runs the FastAPI app in a daemon thread via uvicorn."""

    def __init__(
        self,
        engine: Engine,
        host: Optional[str] = None,
        port: Optional[int] = None,
    ) -> None:
        import uvicorn

        self.engine = engine
        self.hub = BridgeHub(engine)
        self.host = host if host is not None else engine.config.bridge.host
        self.port = port if port is not None else engine.config.bridge.port
        self.app = create_app(engine, self.hub)
        self._uv = uvicorn.Server(
            uvicorn.Config(
                self.app,
                host=self.host,
                port=self.port,
                log_level="warning",
                ws_ping_interval=None,
            )
        )
        self._thread = threading.Thread(target=self._uv.run, name="bridge", daemon=True)

    def start(self, timeout: float = 10.0) -> None:
        self._thread.start()
        import time as _time

        deadline = _time.monotonic() + timeout
        while not self._uv.started:
            if _time.monotonic() > deadline:
                raise RuntimeError("bridge failed to start")
            if not self._thread.is_alive():
                raise OSError(f"bridge could not bind {self.host}:{self.port}")
            _time.sleep(0.02)

    def stop(self) -> None:
        self._uv.should_exit = True
        self._thread.join(timeout=5.0)
