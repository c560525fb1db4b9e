"""Shared probe/verdict types used by every protocol codec."""
from __future__ import annotations

import enum
import ipaddress
import random
from dataclasses import dataclass, field
from typing import Optional, Union

IPAddress = Union[ipaddress.IPv4Address, ipaddress.IPv6Address]

# Verdicts keep at most this many response octets.
RAW_EXCERPT_LIMIT = 256


class Protocol(str, enum.Enum):
    IKE = "ike"
    PPTP = "pptp"
    OPENVPN = "openvpn"
    SSTP = "sstp"
    HTTP_GET = "http_get"


class Transport(str, enum.Enum):
    UDP = "udp"
    TCP = "tcp"


class KeyMethod(str, enum.Enum):
    KM1 = "km1"
    KM2 = "km2"


class HmacMode(str, enum.Enum):
    NONE = "none"
    RANDOM = "random"


VENDOR_PROTOCOLS = frozenset({Protocol.PPTP, Protocol.SSTP})


@dataclass(frozen=True, order=True)
class TransportTarget:
    """One scan destination: address, transport and port."""

    address: IPAddress
    transport: Transport
    port: int

    def __post_init__(self):
        if not isinstance(self.address, (ipaddress.IPv4Address, ipaddress.IPv6Address)):
            object.__setattr__(self, "address", ipaddress.ip_address(self.address))
        object.__setattr__(self, "transport", Transport(self.transport))
        if not 1 <= int(self.port) <= 65535:
            raise ValueError(f"port out of range: {self.port}")

    def __str__(self):
        host = f"[{self.address}]" if self.address.version == 6 else str(self.address)
        return f"{self.transport.value}://{host}:{self.port}"


@dataclass(frozen=True)
class ProbePayload:
    protocol: Protocol
    data: bytes
    variant: str = ""
    transport: Transport = Transport.UDP

    def __post_init__(self):
        if not self.data:
            raise ValueError("probe payload must be non-empty")


@dataclass
class DetectionVerdict:
    detected: bool
    protocol: Protocol
    evidence: list[str] = field(default_factory=list)
    vendor: Optional[str] = None
    key_method: Optional[KeyMethod] = None
    raw_excerpt: bytes = b""

    def __post_init__(self):
        if self.detected and not self.evidence:
            raise ValueError("a positive verdict needs evidence")
        if self.vendor is not None and self.protocol not in VENDOR_PROTOCOLS:
            raise ValueError(f"vendor is not defined for {self.protocol.value}")
        self.raw_excerpt = bytes(self.raw_excerpt[:RAW_EXCERPT_LIMIT])

    @classmethod
    def negative(cls, protocol: Protocol, reason: str, raw: bytes = b"") -> "DetectionVerdict":
        return cls(False, protocol, [reason], raw_excerpt=raw)


def default_rng(rng: Optional[random.Random]) -> random.Random:
    return rng if rng is not None else random.SystemRandom()


def nonzero_bytes(rng: random.Random, n: int) -> bytes:
    while True:
        value = rng.randbytes(n)
        if any(value):
            return value
