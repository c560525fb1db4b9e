"""Suggestion-based TLS downgrade checks and the heartbeat over-read probe.

A server is reported vulnerable when it accepts a hello that offers nothing but the
weak primitive under test. No exploit is attempted.
"""
from __future__ import annotations

import datetime as dt
import enum
import logging
import socket
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional

from ..codec.base import TransportTarget
from . import wire
from .ciphers import (
    RECORD_VERSIONS,
    SSL2_CIPHER_SPECS,
    CipherClass,
    TlsVersion,
    suite_name,
    suites_for,
)

log = logging.getLogger(__name__)

HEARTBEAT_DECLARED_LENGTH = 0x4000
HEARTBEAT_PROBE_PAYLOAD = b"vpnscope-hb-test"


class VulnId(str, enum.Enum):
    RC4 = "rc4"
    HEARTBLEED = "heartbleed"
    POODLE = "poodle"
    FREAK = "freak"
    LOGJAM = "logjam"
    DROWN = "drown"
    ROBOT = "robot"
    RACCOON = "raccoon"


@dataclass(frozen=True)
class VulnCheckSpec:
    vuln_id: VulnId
    offered_versions: frozenset[TlsVersion]
    offered_ciphers: CipherClass
    extra: str = "none"  # or "heartbeat"

    @property
    def cipher_codes(self) -> frozenset[int]:
        if self.offered_versions == {TlsVersion.SSL2}:
            return frozenset(SSL2_CIPHER_SPECS)
        return suites_for(self.offered_ciphers)


_TLS_UP_TO_12 = frozenset({TlsVersion.TLS10, TlsVersion.TLS11, TlsVersion.TLS12})

BUILTIN_CHECKS: dict[VulnId, VulnCheckSpec] = {
    spec.vuln_id: spec
    for spec in (
        VulnCheckSpec(VulnId.RC4, RECORD_VERSIONS, CipherClass.RC4),
        VulnCheckSpec(VulnId.HEARTBLEED, RECORD_VERSIONS, CipherClass.ALL, extra="heartbeat"),
        VulnCheckSpec(VulnId.POODLE, frozenset({TlsVersion.SSL3}), CipherClass.ALL),
        VulnCheckSpec(VulnId.FREAK, RECORD_VERSIONS, CipherClass.RSA_EXPORT),
        VulnCheckSpec(VulnId.LOGJAM, RECORD_VERSIONS, CipherClass.DHE_EXPORT),
        VulnCheckSpec(VulnId.DROWN, frozenset({TlsVersion.SSL2}), CipherClass.ALL),
        VulnCheckSpec(VulnId.ROBOT, RECORD_VERSIONS, CipherClass.TLS_RSA),
        VulnCheckSpec(VulnId.RACCOON, _TLS_UP_TO_12, CipherClass.TLS_DH),
    )
}


@dataclass
class VulnFinding:
    target: TransportTarget
    vuln_id: VulnId
    vulnerable: bool
    detail: str
    timestamp: dt.datetime
    error: Optional[str] = None

    def __post_init__(self):
        if self.vulnerable and not self.detail:
            raise ValueError("a vulnerable finding needs detail")

    def to_json(self) -> dict:
        row = {
            "target_ip": str(self.target.address),
            "port": self.target.port,
            "vuln": self.vuln_id.value,
            "vulnerable": self.vulnerable,
            "detail": self.detail,
            "timestamp": self.timestamp.isoformat().replace("+00:00", "Z"),
        }
        if self.error:
            row["error"] = self.error
        return row


def _utcnow() -> dt.datetime:
    return dt.datetime.now(dt.timezone.utc)


def _label(version: int) -> str:
    try:
        return TlsVersion(version).label
    except ValueError:
        return f"0x{version:04x}"


def _connect(target: TransportTarget, timeout: float) -> socket.socket:
    return socket.create_connection((str(target.address), target.port), timeout=timeout)


def _sslv2_check(target: TransportTarget, spec: VulnCheckSpec, timeout: float, now) -> VulnFinding:
    offered = spec.cipher_codes
    with _connect(target, timeout) as sock:
        sock.sendall(wire.build_sslv2_client_hello(sorted(offered), bytes(16)))
        head = wire.recv_exact(sock, 1)
        if not head:
            return VulnFinding(target, spec.vuln_id, False, "connection closed", now())
        if not head[0] & 0x80:
            return VulnFinding(target, spec.vuln_id, False, "no SSLv2 server hello", now())
        rest = wire.recv_exact(sock, 1)
        length = ((head[0] & 0x7F) << 8) | (rest[0] if rest else 0)
        hello = wire.parse_sslv2_server_hello(wire.recv_exact(sock, length))
    accepted = sorted(set(hello.cipher_specs) & offered)
    if not accepted:
        return VulnFinding(target, spec.vuln_id, False, "SSLv2 hello without an offered cipher", now())
    names = ",".join(SSL2_CIPHER_SPECS[c] for c in accepted)
    return VulnFinding(target, spec.vuln_id, True, f"SSLv2 {names}", now())


def run_downgrade_check(
    target: TransportTarget,
    spec: VulnCheckSpec,
    timeout: float = 5.0,
    now: Callable[[], dt.datetime] = _utcnow,
) -> VulnFinding:
    if spec.extra != "none":
        raise ValueError(f"{spec.vuln_id.value} is not a plain downgrade check")
    try:
        if spec.offered_versions == {TlsVersion.SSL2}:
            return _sslv2_check(target, spec, timeout, now)
        offered = spec.cipher_codes
        with _connect(target, timeout) as sock:
            sock.sendall(wire.build_client_hello(max(spec.offered_versions), sorted(offered)))
            flight = wire.read_server_flight(sock, stop_after_hello=True)
    except (OSError, wire.WireError) as exc:
        return VulnFinding(target, spec.vuln_id, False, "", now(), error=f"{type(exc).__name__}: {exc}")

    hello = flight.server_hello
    if hello is None:
        detail = f"alert {flight.alert_name}" if flight.alert else "connection closed"
        return VulnFinding(target, spec.vuln_id, False, detail, now())
    pair = f"{_label(hello.version)} {suite_name(hello.cipher)}"
    accepted = hello.version in spec.offered_versions and hello.cipher in offered
    if not accepted:
        return VulnFinding(target, spec.vuln_id, False, f"server chose unoffered {pair}", now())
    return VulnFinding(target, spec.vuln_id, True, pair, now())


def _read_heartbeat(sock: socket.socket, expect: int) -> tuple[int, Optional[str]]:
    """Collect heartbeat octets until ``expect`` arrived, an alert, EOF or timeout."""
    received = 0
    try:
        while received < expect:
            rec = wire.read_record(sock)
            if rec is None:
                return received, "connection closed"
            if rec.content_type == wire.CT_ALERT:
                return received, "alert"
            if rec.content_type == wire.CT_HEARTBEAT:
                received += len(rec.payload)
    except socket.timeout:
        return received, "timeout"
    return received, None


def run_heartbleed_check(
    target: TransportTarget, timeout: float = 5.0, now: Callable[[], dt.datetime] = _utcnow
) -> VulnFinding:
    spec = BUILTIN_CHECKS[VulnId.HEARTBLEED]
    try:
        with _connect(target, timeout) as sock:
            sock.sendall(
                wire.build_client_hello(max(spec.offered_versions), sorted(spec.cipher_codes), heartbeat=True)
            )
            flight = wire.read_server_flight(sock)
            hello = flight.server_hello
            if hello is None:
                detail = f"alert {flight.alert_name}" if flight.alert else "connection closed"
                return VulnFinding(target, VulnId.HEARTBLEED, False, f"handshake failed: {detail}", now())
            if wire.EXT_HEARTBEAT not in hello.extensions:
                return VulnFinding(target, VulnId.HEARTBLEED, False, "no heartbeat extension", now())
            request = wire.heartbeat_message(
                wire.HEARTBEAT_REQUEST, HEARTBEAT_DECLARED_LENGTH, HEARTBEAT_PROBE_PAYLOAD
            )
            sock.sendall(wire.record(wire.CT_HEARTBEAT, hello.version, request))
            received, stop = _read_heartbeat(sock, 3 + HEARTBEAT_DECLARED_LENGTH)
    except (OSError, wire.WireError) as exc:
        return VulnFinding(target, VulnId.HEARTBLEED, False, "", now(), error=f"{type(exc).__name__}: {exc}")

    if received > len(request):
        return VulnFinding(target, VulnId.HEARTBLEED, True, f"overread {received - len(request)} octets", now())
    detail = "heartbeat rejected" if stop in ("alert", "connection closed") else "no heartbeat over-read"
    return VulnFinding(target, VulnId.HEARTBLEED, False, detail, now())


def run_check(target: TransportTarget, spec: VulnCheckSpec, timeout: float = 5.0, now=_utcnow) -> VulnFinding:
    if spec.extra == "heartbeat":
        return run_heartbleed_check(target, timeout, now)
    return run_downgrade_check(target, spec, timeout, now)


def summary_matrix(
    findings: Iterable[VulnFinding], protocol_of: Optional[Mapping[TransportTarget, str]] = None
) -> dict[str, dict[str, int]]:
    """Vulnerable-server counts per check and protocol."""
    matrix: dict[str, dict[str, int]] = {v.value: defaultdict(int) for v in VulnId}
    for finding in findings:
        proto = (protocol_of or {}).get(finding.target, "all")
        matrix[finding.vuln_id.value][proto] += finding.vulnerable
    return {k: dict(v) for k, v in matrix.items()}


@dataclass
class VulnRun:
    findings: list[VulnFinding] = field(default_factory=list)
    matrix: dict[str, dict[str, int]] = field(default_factory=dict)


def run_all_checks(
    targets: Iterable[TransportTarget],
    specs: Iterable[VulnCheckSpec] = tuple(BUILTIN_CHECKS.values()),
    timeout: float = 5.0,
    workers: int = 8,
    protocol_of: Optional[Mapping[TransportTarget, str]] = None,
    now: Callable[[], dt.datetime] = _utcnow,
) -> VulnRun:
    """Every (target, spec) pair yields one finding.

    Targets run concurrently; the checks against one target run one after another.
    """
    specs = list(specs)
    targets = list(targets)

    def per_target(target: TransportTarget) -> list[VulnFinding]:
        return [run_check(target, spec, timeout, now) for spec in specs]

    findings: list[VulnFinding] = []
    if workers <= 1:
        for target in targets:
            findings += per_target(target)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for batch in pool.map(per_target, targets):
                findings += batch
    return VulnRun(findings, summary_matrix(findings, protocol_of))

