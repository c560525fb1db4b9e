"""Mock server profiles and their JSON form."""
from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Union

from ..tls.ciphers import CipherClass, TlsVersion, suites_for


class Behavior(str, enum.Enum):
    CANONICAL = "canonical"
    SILENT = "silent"
    MALFORMED = "malformed"
    DELAYED = "delayed"


MOCK_PROTOCOLS = ("ike", "pptp", "openvpn", "sstp", "web")


@dataclass
class TlsConfig:
    """TLS personality of a mock endpoint.

    ``engine="stdlib"`` terminates real TLS with the platform stack (needed whenever an
    application exchange follows). ``engine="synthetic"`` only answers the first flight
    but can emulate SSLv2/SSLv3, RC4, export suites and heartbeat over-reads.
    """

    engine: str = "stdlib"
    versions: tuple[str, ...] = ("TLS12", "TLS13")
    cipher_classes: tuple[str, ...] = ("modern",)
    extra_ciphers: tuple[int, ...] = ()
    heartbeat: str = "none"  # none | vulnerable | strict
    cert_file: Optional[str] = None
    key_file: Optional[str] = None
    sni_certs: dict[str, tuple[str, str]] = field(default_factory=dict)

    def __post_init__(self):
        if self.engine not in ("stdlib", "synthetic"):
            raise ValueError(f"unknown TLS engine {self.engine!r}")
        if self.heartbeat not in ("none", "vulnerable", "strict"):
            raise ValueError(f"unknown heartbeat mode {self.heartbeat!r}")
        for v in self.versions:
            TlsVersion[v]
        for c in self.cipher_classes:
            CipherClass(c)

    @property
    def version_set(self) -> frozenset[TlsVersion]:
        return frozenset(TlsVersion[v] for v in self.versions)

    @property
    def cipher_set(self) -> frozenset[int]:
        return suites_for(*self.cipher_classes) | frozenset(self.extra_ciphers)


@dataclass
class MockProfile:
    protocol: str
    behavior: Behavior = Behavior.CANONICAL
    tls_config: Optional[TlsConfig] = None
    vendor_string: Optional[str] = None
    key_method: Optional[str] = None  # openvpn: km1 | km2 (default km2)
    delay: Optional[float] = None  # seconds, behavior=delayed only
    transport: str = "udp"  # openvpn only; other protocols have a fixed transport
    openvpn_hmac: str = "none"  # none | tls-auth | accept-any
    address: str = "127.0.0.1"
    port: int = 0

    def __post_init__(self):
        if self.protocol not in MOCK_PROTOCOLS:
            raise ValueError(f"unknown mock protocol {self.protocol!r}")
        self.behavior = Behavior(self.behavior)
        if isinstance(self.tls_config, dict):
            self.tls_config = TlsConfig(**self.tls_config)
        if self.protocol == "sstp" and self.tls_config is None:
            self.tls_config = TlsConfig()
        if self.delay is not None and self.behavior is not Behavior.DELAYED:
            raise ValueError("delay is only meaningful with behavior=delayed")
        if self.behavior is Behavior.DELAYED and self.delay is None:
            self.delay = 1.0
        if self.protocol == "sstp" and self.tls_config.engine != "stdlib":
            raise ValueError("SSTP needs a full TLS session (engine=stdlib)")

    @property
    def effective_transport(self) -> str:
        if self.protocol == "ike":
            return "udp"
        if self.protocol == "openvpn":
            return self.transport
        return "tcp"

    def to_json(self) -> dict:
        return asdict(self)


def legacy_tls() -> TlsConfig:
    """SSLv3 + RC4 + RSA key exchange, no heartbeat."""
    return TlsConfig(
        engine="synthetic",
        versions=("SSL3", "TLS10", "TLS12"),
        cipher_classes=(),
        extra_ciphers=(0x0005, 0x002F),  # RSA_WITH_RC4_128_SHA, RSA_WITH_AES_128_CBC_SHA
    )


def heartbleed_tls() -> TlsConfig:
    return TlsConfig(engine="synthetic", versions=("TLS12",), cipher_classes=("modern",), heartbeat="vulnerable")


def modern_tls() -> TlsConfig:
    return TlsConfig(engine="stdlib", versions=("TLS12", "TLS13"), cipher_classes=("modern",))


def load_profiles(path: Union[str, Path]) -> list[MockProfile]:
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = data.get("profiles", [])
    return [MockProfile(**entry) for entry in data]
