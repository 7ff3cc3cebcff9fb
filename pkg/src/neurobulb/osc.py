"""Open Sound Control 1.0 codec and UDP listener.

Bit-exact wire format: NUL-padded 4-byte-aligned strings, a comma-prefixed
type tag string, big-endian arguments. Supported argument types are float32
('f'), int32 ('i') and string ('s'). Bundles ("#bundle") are unpacked one
level deep; nested bundles are rejected. decode() is total: any byte
sequence either yields a message or raises a specific OscDecodeError.
"""

from __future__ import annotations

import socket
import struct
import threading
from dataclasses import dataclass
from typing import Callable, Union

OscArg = Union[float, int, str]

MAX_PACKET_BYTES = 64 * 1024
BUNDLE_TAG = b"#bundle\x00"


@dataclass(frozen=True)
class OscMessage:
    address: str
    args: tuple[OscArg, ...] = ()


class OscError(Exception):
    """Base for all codec errors."""


class OscEncodeError(OscError):
    """Message cannot be represented on the wire (bad address/arg type)."""


class OscDecodeError(OscError):
    """Base for decode failures; subclasses identify the defect."""


class TruncatedPacketError(OscDecodeError):
    pass


class MissingTypeTagsError(OscDecodeError):
    pass


class BadPaddingError(OscDecodeError):
    pass


class UnknownTypeTagError(OscDecodeError):
    pass


class BadAddressError(OscDecodeError):
    pass


class PacketTooLargeError(OscDecodeError):
    pass


class NestedBundleError(OscDecodeError):
    pass


def _pad_str(s: str) -> bytes:
    try:
        raw = s.encode("utf-8")
    except UnicodeEncodeError as exc:  # pragma: no cover - str.encode utf-8 is total
        raise OscEncodeError(f"unencodable string: {s!r}") from exc
    if b"\x00" in raw:
        raise OscEncodeError("string arguments may not contain NUL")
    return raw + b"\x00" * (4 - len(raw) % 4)


def encode(msg: OscMessage) -> bytes:
    """Encode a message; output length is always a multiple of 4."""
    if not msg.address.startswith("/"):
        raise OscEncodeError(f"address must start with '/': {msg.address!r}")
    tags = ","
    body = b""
    for arg in msg.args:
        if isinstance(arg, bool):
            raise OscEncodeError("bool is not an OSC argument type")
        if isinstance(arg, float):
            tags += "f"
            body += struct.pack(">f", arg)
        elif isinstance(arg, int):
            tags += "i"
            body += struct.pack(">i", arg)
        elif isinstance(arg, str):
            tags += "s"
            body += _pad_str(arg)
        else:
            raise OscEncodeError(f"unsupported argument type: {type(arg).__name__}")
    return _pad_str(msg.address) + _pad_str(tags) + body


def _read_padded_str(data: bytes, offset: int) -> tuple[str, int]:
    end = data.find(b"\x00", offset)
    if end < 0:
        raise TruncatedPacketError("unterminated string")
    raw = data[offset:end]
    next_offset = offset + ((end - offset) // 4 + 1) * 4
    if next_offset > len(data):
        raise TruncatedPacketError("string padding runs past end of packet")
    if data[end:next_offset].strip(b"\x00"):
        raise BadPaddingError("non-NUL bytes in string padding")
    try:
        return raw.decode("utf-8"), next_offset
    except UnicodeDecodeError as exc:
        raise BadPaddingError("string is not valid UTF-8") from exc


def decode(data: bytes) -> OscMessage:
    """Decode a single message (not a bundle) from raw bytes."""
    if len(data) > MAX_PACKET_BYTES:
        raise PacketTooLargeError(f"{len(data)} bytes exceeds {MAX_PACKET_BYTES}")
    if len(data) == 0:
        raise TruncatedPacketError("empty packet")
    if len(data) % 4 != 0:
        raise BadPaddingError(f"packet length {len(data)} is not a multiple of 4")
    address, offset = _read_padded_str(data, 0)
    if not address.startswith("/"):
        raise BadAddressError(f"address must start with '/': {address!r}")
    if offset >= len(data):
        raise MissingTypeTagsError("packet ends before type tag string")
    tags, offset = _read_padded_str(data, offset)
    if not tags.startswith(","):
        raise MissingTypeTagsError(f"type tag string must start with ',': {tags!r}")
    args: list[OscArg] = []
    for tag in tags[1:]:
        if tag == "f":
            if offset + 4 > len(data):
                raise TruncatedPacketError("float32 argument truncated")
            args.append(struct.unpack_from(">f", data, offset)[0])
            offset += 4
        elif tag == "i":
            if offset + 4 > len(data):
                raise TruncatedPacketError("int32 argument truncated")
            args.append(struct.unpack_from(">i", data, offset)[0])
            offset += 4
        elif tag == "s":
            string, offset = _read_padded_str(data, offset)
            args.append(string)
        else:
            raise UnknownTypeTagError(f"unknown type tag {tag!r}")
    if offset != len(data):
        raise BadPaddingError(f"{len(data) - offset} trailing bytes after arguments")
    return OscMessage(address=address, args=tuple(args))


def decode_packet(data: bytes) -> list[OscMessage]:
    """Decode a datagram: either one message or a flat bundle of messages."""
    if len(data) > MAX_PACKET_BYTES:
        raise PacketTooLargeError(f"{len(data)} bytes exceeds {MAX_PACKET_BYTES}")
    if not data.startswith(BUNDLE_TAG):
        return [decode(data)]
    offset = len(BUNDLE_TAG) + 8  # skip the 8-byte time tag, dispatch immediately
    if offset > len(data):
        raise TruncatedPacketError("bundle header truncated")
    messages: list[OscMessage] = []
    while offset < len(data):
        if offset + 4 > len(data):
            raise TruncatedPacketError("bundle element size truncated")
        (size,) = struct.unpack_from(">i", data, offset)
        offset += 4
        if size < 0 or size % 4 != 0:
            raise BadPaddingError(f"bundle element size {size} is not a multiple of 4")
        if offset + size > len(data):
            raise TruncatedPacketError("bundle element runs past end of packet")
        element = data[offset : offset + size]
        if element.startswith(BUNDLE_TAG):
            raise NestedBundleError("nested bundles are not supported")
        messages.append(decode(element))
        offset += size
    return messages


@dataclass
class ListenerStats:
    received: int = 0
    delivered: int = 0
    dropped: int = 0  # malformed datagrams


class OscListener:
    """UDP listener that decodes datagrams and hands messages to a sink.

    The sink is invoked on the listener thread; it must be thread-safe.
    Malformed datagrams are counted and dropped, never raised.
    """

    def __init__(
        self,
        port: int,
        sink: Callable[[OscMessage], None],
        host: str = "0.0.0.0",
    ) -> None:
        self._sink = sink
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        try:
            self._sock.bind((host, port))
        except OSError:
            self._sock.close()
            raise
        self._sock.settimeout(0.2)
        self.port = self._sock.getsockname()[1]
        self.stats = ListenerStats()
        self._stop = threading.Event()
        self._thread = threading.Thread(
            target=self._run, name=f"osc-listener:{self.port}", daemon=True
        )
        self._thread.start()

    def _run(self) -> None:
        while not self._stop.is_set():
            try:
                data, _addr = self._sock.recvfrom(MAX_PACKET_BYTES + 1)
            except socket.timeout:
                continue
            except OSError:
                break
            self.stats.received += 1
            try:
                messages = decode_packet(data)
            except OscDecodeError:
                self.stats.dropped += 1
                continue
            for msg in messages:
                self._sink(msg)
                self.stats.delivered += 1

    def close(self) -> None:
        self._stop.set()
        self._thread.join(timeout=2.0)
        self._sock.close()

    def __enter__(self) -> "OscListener":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
