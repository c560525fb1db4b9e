"""Transport-free construction of VPN initiation probes and classification of responses."""
from __future__ import annotations

import re
from pathlib import Path
from typing import Union

from . import http, ike, openvpn, pptp
from .base import (
    RAW_EXCERPT_LIMIT,
    DetectionVerdict,
    HmacMode,
    IPAddress,
    KeyMethod,
    ProbePayload,
    Protocol,
    Transport,
    TransportTarget,
)
from .http import build_http_get, build_sstp_request, classify_web_response, parse_sstp_response
from .ike import build_ike_probe, parse_ike_response
from .openvpn import build_openvpn_probe, parse_openvpn_response
from .pptp import build_pptp_probe, parse_pptp_response


def parse_response(probe: ProbePayload, data: bytes) -> DetectionVerdict:
    """Dispatch ``data`` to the parser matching ``probe.protocol``."""
    if probe.protocol is Protocol.IKE:
        return parse_ike_response(probe, data)
    if probe.protocol is Protocol.PPTP:
        return parse_pptp_response(data)
    if probe.protocol is Protocol.OPENVPN:
        return parse_openvpn_response(probe, data)
    if probe.protocol is Protocol.SSTP:
        return parse_sstp_response(data)
    raise ValueError(f"no VPN parser for {probe.protocol.value}")


def response_complete(probe: ProbePayload, buffer: bytes) -> bool:
    """True once a stream response holds enough octets to classify."""
    if probe.protocol is Protocol.PPTP:
        return pptp.response_complete(buffer)
    if probe.protocol is Protocol.OPENVPN:
        return openvpn.response_complete(buffer)
    return http.response_complete(buffer)


_HEX_PAIR = re.compile(r"[0-9a-fA-F]{2}")


def loads_hex(text: str) -> bytes:
    """Decode a hex dump: whitespace-separated octet pairs, ``#`` starts a comment."""
    out = bytearray()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0]
        for token in line.split():
            if len(token) % 2 or not all(_HEX_PAIR.fullmatch(token[i:i + 2]) for i in range(0, len(token), 2)):
                raise ValueError(f"line {lineno}: bad hex token {token!r}")
            out += bytes.fromhex(token)
    return bytes(out)


def dumps_hex(data: bytes, comment: str = "", width: int = 16) -> str:
    lines = [f"# {c}" for c in comment.splitlines()] if comment else []
    for i in range(0, len(data), width):
        lines.append(" ".join(f"{b:02x}" for b in data[i:i + width]))
    return "\n".join(lines) + "\n"


def load_hex(path: Union[str, Path]) -> bytes:
    return loads_hex(Path(path).read_text())


__all__ = [
    "RAW_EXCERPT_LIMIT",
    "DetectionVerdict",
    "HmacMode",
    "IPAddress",
    "KeyMethod",
    "ProbePayload",
    "Protocol",
    "Transport",
    "TransportTarget",
    "build_http_get",
    "build_ike_probe",
    "build_openvpn_probe",
    "build_pptp_probe",
    "build_sstp_request",
    "classify_web_response",
    "dumps_hex",
    "http",
    "ike",
    "load_hex",
    "loads_hex",
    "openvpn",
    "parse_ike_response",
    "parse_openvpn_response",
    "parse_pptp_response",
    "parse_response",
    "parse_sstp_response",
    "pptp",
    "response_complete",
]
