"""SSTP duplex request and plain HTTP probes."""
from __future__ import annotations

import random
import re
import uuid
from typing import Optional

from .base import DetectionVerdict, ProbePayload, Protocol, Transport, default_rng

SSTP_URI = "/sra_{BA195980-CD49-458b-9E23-C84EE0ADCD75}/"
SSTP_METHOD = "SSTP_DUPLEX_POST"
# ULONGLONG max; the duplex stream never ends from the server's point of view.
SSTP_CONTENT_LENGTH = 18446744073709551615

_STATUS_LINE = re.compile(rb"^HTTP/(\d)\.(\d) (\d{3})(?: ([^\r\n]*))?\r?\n")


def build_sstp_request(host_header: str, rng: Optional[random.Random] = None) -> ProbePayload:
    if not host_header:
        raise ValueError("host header must be non-empty")
    correlation = uuid.UUID(int=default_rng(rng).getrandbits(128), version=4)
    request = (
        f"{SSTP_METHOD} {SSTP_URI} HTTP/1.1\r\n"
        f"Host: {host_header}\r\n"
        f"SSTPCORRELATIONID: {{{str(correlation).upper()}}}\r\n"
        f"Content-Length: {SSTP_CONTENT_LENGTH}\r\n"
        "\r\n"
    )
    return ProbePayload(Protocol.SSTP, request.encode("ascii"), variant="duplex-post", transport=Transport.TCP)


def build_http_get(host: str, path: str = "/") -> ProbePayload:
    request = (
        f"GET {path} HTTP/1.1\r\n"
        f"Host: {host}\r\n"
        "User-Agent: vpnscope\r\n"
        "Accept: */*\r\n"
        "Connection: close\r\n"
        "\r\n"
    )
    return ProbePayload(Protocol.HTTP_GET, request.encode("ascii"), variant="get", transport=Transport.TCP)


def parse_status(data: bytes) -> Optional[tuple[int, dict[str, str]]]:
    """Status code and (lower-cased) headers, or ``None`` when ``data`` is not an HTTP response."""
    match = _STATUS_LINE.match(data)
    if match is None:
        return None
    status = int(match.group(3))
    head = data[match.end():].split(b"\r\n\r\n", 1)[0]
    headers: dict[str, str] = {}
    for line in head.split(b"\r\n"):
        name, sep, value = line.partition(b":")
        if sep and name.strip():
            headers.setdefault(name.strip().decode("latin-1").lower(), value.strip().decode("latin-1"))
    return status, headers


def parse_sstp_response(data: bytes) -> DetectionVerdict:
    parsed = parse_status(data)
    if parsed is None:
        return DetectionVerdict.negative(Protocol.SSTP, "not an HTTP response", data)
    status, headers = parsed
    if status != 200:
        return DetectionVerdict.negative(Protocol.SSTP, f"HTTP {status}", data)
    return DetectionVerdict(
        True, Protocol.SSTP, ["HTTP 200 to duplex post"], vendor=headers.get("server") or None, raw_excerpt=data
    )


def classify_web_response(data: bytes) -> bool:
    # Any status counts: redirects and errors still come from an HTTP stack.
    return parse_status(data) is not None


def response_complete(buffer: bytes) -> bool:
    return b"\r\n\r\n" in buffer
