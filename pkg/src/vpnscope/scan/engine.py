"""Probe dispatch: one result per (target, probe kind), rate limited and blocklist aware."""
from __future__ import annotations

import datetime as dt
import ipaddress
import logging
import random
import socket
import ssl
import time
from collections import Counter
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, Optional, Sequence, Union

from ..codec import (
    DetectionVerdict,
    ProbePayload,
    Protocol,
    Transport,
    TransportTarget,
    build_http_get,
    build_ike_probe,
    build_openvpn_probe,
    build_pptp_probe,
    build_sstp_request,
    parse_response,
    response_complete,
)
from ..codec.base import HmacMode, KeyMethod
from ..codec.http import parse_status
from .ratelimit import TokenBucket
from .targets import Address, Network, is_blocked, load_blocklist, load_targets

log = logging.getLogger(__name__)

MAX_RESPONSE = 64 * 1024


@dataclass(frozen=True)
class ProbeKind:
    name: str
    protocol: Protocol
    transport: Transport
    port: int
    tls: bool = False


PROBE_KINDS: dict[str, ProbeKind] = {
    k.name: k
    for k in (
        ProbeKind("ike", Protocol.IKE, Transport.UDP, 500),
        ProbeKind("pptp", Protocol.PPTP, Transport.TCP, 1723),
        ProbeKind("openvpn", Protocol.OPENVPN, Transport.UDP, 1194),
        ProbeKind("openvpn-tcp", Protocol.OPENVPN, Transport.TCP, 1194),
        ProbeKind("sstp", Protocol.SSTP, Transport.TCP, 443, tls=True),
    )
}
DEFAULT_KINDS = ("ike", "pptp", "openvpn", "sstp")


def parse_kinds(text: str) -> tuple[str, ...]:
    kinds = tuple(k.strip() for k in text.split(",") if k.strip())
    unknown = [k for k in kinds if k not in PROBE_KINDS]
    if unknown:
        raise ValueError(f"unknown protocol(s): {', '.join(unknown)}; choose from {', '.join(PROBE_KINDS)}")
    return kinds


def parse_port_overrides(text: str) -> dict[str, int]:
    """``"ike=5000,sstp=8443"`` -> ``{"ike": 5000, "sstp": 8443}``."""
    out = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        name, sep, port = item.partition("=")
        if not sep or name not in PROBE_KINDS:
            raise ValueError(f"bad port override {item!r}")
        out[name] = int(port)
    return out


@dataclass
class ScanConfig:
    targets_source: Optional[Union[str, Path]] = None
    protocols: tuple[str, ...] = DEFAULT_KINDS
    rate_limit: float = 100.0
    timeout: float = 1000.0  # milliseconds
    retries: Optional[int] = None  # None: 1 for UDP, 0 for TCP
    blocklist: Sequence[Network] = ()
    seed: int = 0
    ports: dict[str, int] = field(default_factory=dict)
    workers: int = 32
    burst: int = 10
    fixed_time: Optional[dt.datetime] = None
    openvpn_key_method: KeyMethod = KeyMethod.KM2
    openvpn_hmac: HmacMode = HmacMode.NONE

    def __post_init__(self):
        if self.rate_limit <= 0:
            raise ValueError("rate_limit must be positive")
        if self.timeout < 1:
            raise ValueError("timeout must be at least 1 ms")
        if self.retries is not None and not 0 <= self.retries <= 10:
            raise ValueError("retries must be between 0 and 10")
        self.protocols = tuple(self.protocols)
        parse_kinds(",".join(self.protocols))
        self.blocklist = [ipaddress.ip_network(n, strict=False) for n in self.blocklist]

    def retries_for(self, transport: Transport) -> int:
        if self.retries is not None:
            return self.retries
        return 1 if transport is Transport.UDP else 0

    def port_for(self, kind: str) -> int:
        return self.ports.get(kind, PROBE_KINDS[kind].port)

    @property
    def timeout_s(self) -> float:
        return self.timeout / 1000.0


@dataclass
class ScanResult:
    target: TransportTarget
    verdict: DetectionVerdict
    rtt: Optional[float]  # milliseconds
    timestamp: dt.datetime
    attempt: int
    kind: str = ""
    index: int = 0  # dispatch position, for order-independent sorting

    def to_json(self) -> dict:
        row = {
            "target_ip": str(self.target.address),
            "transport": self.target.transport.value,
            "port": self.target.port,
            "protocol": self.verdict.protocol.value,
            "detected": self.verdict.detected,
            "evidence": list(self.verdict.evidence),
        }
        if self.verdict.vendor is not None:
            row["vendor"] = self.verdict.vendor
        if self.verdict.key_method is not None:
            row["key_method"] = self.verdict.key_method.value
        if self.rtt is not None:
            row["rtt_ms"] = round(self.rtt, 3)
        row["timestamp"] = self.timestamp.isoformat().replace("+00:00", "Z")
        row["attempt"] = self.attempt
        return row


def _now(config: ScanConfig) -> dt.datetime:
    return config.fixed_time or dt.datetime.now(dt.timezone.utc)


def _rtt(config: ScanConfig, start: float) -> Optional[float]:
    # Timing is the one nondeterministic field; drop it when the clock is pinned.
    if config.fixed_time is not None:
        return None
    return (time.monotonic() - start) * 1000.0


def probe_rng(seed: int, target: TransportTarget, kind: str) -> random.Random:
    return random.Random(f"{seed}:{target}:{kind}")


def build_probe(kind: str, target: TransportTarget, config: ScanConfig) -> ProbePayload:
    rng = probe_rng(config.seed, target, kind)
    spec = PROBE_KINDS[kind]
    if spec.protocol is Protocol.IKE:
        return build_ike_probe(rng)
    if spec.protocol is Protocol.PPTP:
        return build_pptp_probe()
    if spec.protocol is Protocol.OPENVPN:
        net_time = int(config.fixed_time.timestamp()) if config.fixed_time else None
        return build_openvpn_probe(spec.transport, config.openvpn_key_method, config.openvpn_hmac, rng, net_time)
    return build_sstp_request(str(target.address), rng)


def _family(target: TransportTarget) -> int:
    return socket.AF_INET6 if target.address.version == 6 else socket.AF_INET


def _blocked_result(target, payload, config) -> ScanResult:
    return ScanResult(target, DetectionVerdict.negative(payload.protocol, "blocklisted"), None, _now(config), 1)


def probe_udp(
    target: TransportTarget,
    payload: ProbePayload,
    config: ScanConfig,
    limiter: Optional[TokenBucket] = None,
) -> ScanResult:
    """Send ``payload`` and classify the first datagram from the target; resend on silence."""
    if target.transport is not Transport.UDP:
        raise ValueError("probe_udp needs a UDP target")
    if is_blocked(target.address, config.blocklist):
        return _blocked_result(target, payload, config)
    retries = config.retries_for(Transport.UDP)
    peer = (str(target.address), target.port)
    try:
        sock = socket.socket(_family(target), socket.SOCK_DGRAM)
    except OSError as exc:
        verdict = DetectionVerdict.negative(payload.protocol, f"socket error: {exc}")
        return ScanResult(target, verdict, None, _now(config), 1)
    with sock:
        for attempt in range(1, retries + 2):
            if limiter:
                limiter.acquire()
            start = time.monotonic()
            deadline = start + config.timeout_s
            try:
                sock.sendto(payload.data, peer)
                while True:
                    remaining = deadline - time.monotonic()
                    if remaining <= 0:
                        break
                    sock.settimeout(remaining)
                    data, source = sock.recvfrom(MAX_RESPONSE)
                    if ipaddress.ip_address(source[0]) == target.address and source[1] == target.port:
                        verdict = parse_response(payload, data)
                        return ScanResult(target, verdict, _rtt(config, start), _now(config), attempt)
            except socket.timeout:
                continue
            except OSError as exc:
                # ICMP port unreachable surfaces here as ConnectionRefusedError
                reason = "port unreachable" if isinstance(exc, ConnectionRefusedError) else f"socket error: {exc}"
                if attempt <= retries:
                    continue
                return ScanResult(target, DetectionVerdict.negative(payload.protocol, reason), None, _now(config), attempt)
    verdict = DetectionVerdict.negative(payload.protocol, "no response")
    return ScanResult(target, verdict, None, _now(config), retries + 1)


def _tls_client_context() -> ssl.SSLContext:
    ctx = ssl.SSLContext(ssl.PROTOCOL_TLS_CLIENT)
    ctx.check_hostname = False
    ctx.verify_mode = ssl.CERT_NONE
    return ctx


def _read_response(sock, payload: ProbePayload) -> bytes:
    buf = b""
    while len(buf) < MAX_RESPONSE and not response_complete(payload, buf):
        try:
            chunk = sock.recv(MAX_RESPONSE - len(buf))
        except socket.timeout:
            break
        if not chunk:
            break
        buf += chunk
    return buf


def _tcp_attempt(target: TransportTarget, payload: ProbePayload, config: ScanConfig, tls: bool):
    """One connect/exchange. Returns (verdict, response_start or None, retryable)."""
    proto = payload.protocol
    try:
        sock = socket.create_connection((str(target.address), target.port), timeout=config.timeout_s)
    except ConnectionRefusedError:
        return DetectionVerdict.negative(proto, "connection refused"), None, False
    except socket.timeout:
        return DetectionVerdict.negative(proto, "connect timeout"), None, True
    except OSError as exc:
        return DetectionVerdict.negative(proto, f"connect error: {exc.strerror or exc}"), None, False
    try:
        if tls:
            try:
                sock = _tls_client_context().wrap_socket(sock)
            except (ssl.SSLError, socket.timeout, OSError) as exc:
                reason = getattr(exc, "reason", None) or type(exc).__name__
                return DetectionVerdict.negative(proto, f"tls handshake failed: {reason}"), None, False
        start = time.monotonic()
        try:
            sock.sendall(payload.data)
            data = _read_response(sock, payload)
        except OSError as exc:
            return DetectionVerdict.negative(proto, f"exchange error: {type(exc).__name__}"), None, False
        if not data:
            return DetectionVerdict.negative(proto, "no response"), None, False
        return parse_response(payload, data), start, False
    finally:
        sock.close()


def probe_tcp(
    target: TransportTarget,
    payload: ProbePayload,
    config: ScanConfig,
    tls: bool = False,
    limiter: Optional[TokenBucket] = None,
) -> ScanResult:
    """Connect (optionally TLS), exchange ``payload`` and classify the reply.

    Only connect timeouts are retried; a refusal or an answer is final.
    """
    if target.transport is not Transport.TCP:
        raise ValueError("probe_tcp needs a TCP target")
    if is_blocked(target.address, config.blocklist):
        return _blocked_result(target, payload, config)
    retries = config.retries_for(Transport.TCP)
    attempt = 1
    while True:
        if limiter:
            limiter.acquire()
        verdict, start, retryable = _tcp_attempt(target, payload, config, tls)
        if not (retryable and attempt <= retries):
            break
        attempt += 1
    rtt = _rtt(config, start) if start is not None else None
    return ScanResult(target, verdict, rtt, _now(config), attempt)


def probe(kind: str, address: Address, config: ScanConfig, limiter: Optional[TokenBucket] = None) -> ScanResult:
    spec = PROBE_KINDS[kind]
    target = TransportTarget(address, spec.transport, config.port_for(kind))
    payload = build_probe(kind, target, config)
    if spec.transport is Transport.UDP:
        result = probe_udp(target, payload, config, limiter)
    else:
        result = probe_tcp(target, payload, config, spec.tls, limiter)
    result.kind = kind
    return result


@dataclass
class ScanSummary:
    results: int = 0
    detections: Counter = field(default_factory=Counter)  # protocol -> count
    by_kind: Counter = field(default_factory=Counter)

    def add(self, result: ScanResult):
        self.results += 1
        self.detections.setdefault(result.verdict.protocol.value, 0)
        self.by_kind.setdefault(result.kind, 0)
        if result.verdict.detected:
            self.detections[result.verdict.protocol.value] += 1
            self.by_kind[result.kind] += 1

    @property
    def total_detections(self) -> int:
        return sum(self.detections.values())

    def to_json(self) -> dict:
        return {
            "results": self.results,
            "detections": dict(sorted(self.detections.items())),
            "by_kind": dict(sorted(self.by_kind.items())),
        }


def dispatch_plan(addresses: Iterable[Address], config: ScanConfig) -> Iterator[tuple[int, str, Address]]:
    """(index, kind, address) in dispatch order; blocklisted addresses never appear."""
    index = 0
    for address in addresses:
        if is_blocked(address, config.blocklist):
            continue
        for kind in config.protocols:
            yield index, kind, address
            index += 1


def run_sweep(
    config: ScanConfig,
    addresses: Optional[Iterable[Address]] = None,
    summary: Optional[ScanSummary] = None,
    limiter: Optional[TokenBucket] = None,
    clock: Callable[[], float] = time.monotonic,
) -> Iterator[ScanResult]:
    """Yield one result per (address, probe kind) as probes finish.

    ``addresses`` defaults to the seeded permutation of ``config.targets_source``.
    With ``workers=1`` probes run inline, in dispatch order.
    """
    if addresses is None:
        if config.targets_source is None:
            raise ValueError("no targets: pass addresses or set targets_source")
        addresses = load_targets(config.targets_source, config.seed, config.blocklist)
    limiter = limiter or TokenBucket(config.rate_limit, config.burst, clock=clock)
    summary = summary if summary is not None else ScanSummary()
    plan = dispatch_plan(addresses, config)

    def run(item) -> ScanResult:
        index, kind, address = item
        result = probe(kind, address, config, limiter)
        result.index = index
        return result

    if config.workers <= 1:
        for item in plan:
            result = run(item)
            summary.add(result)
            yield result
        return

    window = config.workers * 4
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        pending = set()
        exhausted = False
        while pending or not exhausted:
            while not exhausted and len(pending) < window:
                item = next(plan, None)
                if item is None:
                    exhausted = True
                else:
                    pending.add(pool.submit(run, item))
            if not pending:
                break
            done, pending = wait(pending, return_when=FIRST_COMPLETED)
            for fut in done:
                result = fut.result()
                summary.add(result)
                yield result


def config_from_files(targets: Union[str, Path], blocklist: Union[str, Path, None] = None, **kwargs) -> ScanConfig:
    return ScanConfig(targets_source=targets, blocklist=load_blocklist(blocklist), **kwargs)


@dataclass
class WebCheck:
    address: Address
    port: int
    responded: bool
    status: Optional[int] = None

    def to_json(self) -> dict:
        row = {"target_ip": str(self.address), "port": self.port, "responded": self.responded}
        if self.status is not None:
            row["status"] = self.status
        return row


def probe_http(address: Address, port: int, config: ScanConfig, limiter: Optional[TokenBucket] = None) -> WebCheck:
    """Plain HTTP GET; any HTTP status line marks the address as a web responder."""
    if is_blocked(ipaddress.ip_address(address), config.blocklist):
        return WebCheck(address, port, False)
    if limiter:
        limiter.acquire()
    payload = build_http_get(str(address))
    try:
        with socket.create_connection((str(address), port), timeout=config.timeout_s) as sock:
            sock.sendall(payload.data)
            data = _read_response(sock, payload)
    except OSError:
        return WebCheck(address, port, False)
    parsed = parse_status(data)
    return WebCheck(address, port, parsed is not None, parsed[0] if parsed else None)
