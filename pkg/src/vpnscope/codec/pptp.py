"""PPTP Start-Control-Connection Request/Reply (RFC 2637)."""
from __future__ import annotations

import struct
from typing import NamedTuple, Optional

from .base import DetectionVerdict, ProbePayload, Protocol, Transport

MAGIC_COOKIE = 0x1A2B3C4D
CONTROL_MESSAGE = 1
SCCRQ = 1
SCCRP = 2
PROTOCOL_VERSION = 0x0100
SCC_LENGTH = 156

FRAMING_ASYNC_SYNC = 0x3
BEARER_ANALOG_DIGITAL = 0x3

_SCCRQ = struct.Struct("!HHIHHHHIIHH64s64s")
_SCCRP = struct.Struct("!HHIHHHBBIIHH64s64s")
assert _SCCRQ.size == _SCCRP.size == SCC_LENGTH


class StartControlReply(NamedTuple):
    length: int
    message_type: int
    magic: int
    control_type: int
    protocol_version: int
    result_code: int
    error_code: int
    framing: int
    bearer: int
    max_channels: int
    firmware: int
    hostname: bytes
    vendor: bytes


def encode_sccrq(hostname: bytes = b"", vendor: bytes = b"") -> bytes:
    return _SCCRQ.pack(
        SCC_LENGTH, CONTROL_MESSAGE, MAGIC_COOKIE, SCCRQ, 0, PROTOCOL_VERSION, 0,
        FRAMING_ASYNC_SYNC, BEARER_ANALOG_DIGITAL, 0, 0, hostname, vendor,
    )


def encode_sccrp(vendor: str, hostname: str = "", result_code: int = 1, firmware: int = 1) -> bytes:
    return _SCCRP.pack(
        SCC_LENGTH, CONTROL_MESSAGE, MAGIC_COOKIE, SCCRP, 0, PROTOCOL_VERSION, result_code, 0,
        FRAMING_ASYNC_SYNC, BEARER_ANALOG_DIGITAL, 0xFFFF, firmware,
        hostname.encode("latin-1", "replace"), vendor.encode("latin-1", "replace"),
    )


def decode_sccrp(data: bytes) -> Optional[StartControlReply]:
    if len(data) < SCC_LENGTH:
        return None
    fields = _SCCRP.unpack_from(data)
    return StartControlReply(*fields[:4], *fields[5:])


def build_pptp_probe() -> ProbePayload:
    return ProbePayload(Protocol.PPTP, encode_sccrq(), variant="sccrq", transport=Transport.TCP)


def _text(field: bytes) -> Optional[str]:
    text = field.split(b"\x00", 1)[0].decode("latin-1").strip()
    return text or None


def parse_pptp_response(data: bytes) -> DetectionVerdict:
    reply = decode_sccrp(data)
    if reply is None:
        return DetectionVerdict.negative(Protocol.PPTP, "short read", data)
    if reply.magic != MAGIC_COOKIE:
        return DetectionVerdict.negative(Protocol.PPTP, "bad magic cookie", data)
    if reply.message_type != CONTROL_MESSAGE or reply.control_type != SCCRP:
        return DetectionVerdict.negative(
            Protocol.PPTP, f"control message type {reply.control_type}, expected SCCRP", data
        )
    evidence = ["magic cookie", "SCCRP message type"]
    if reply.length != SCC_LENGTH:
        evidence.append(f"length field {reply.length}")
    return DetectionVerdict(
        True, Protocol.PPTP, evidence, vendor=_text(reply.vendor), raw_excerpt=data
    )


def response_complete(buffer: bytes) -> bool:
    return len(buffer) >= SCC_LENGTH
