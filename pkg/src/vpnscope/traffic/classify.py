"""Flow records and the three ways of labelling a flow as VPN traffic."""
from __future__ import annotations

import csv
import datetime as dt
import enum
import ipaddress
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Optional, Union

from .psl import PublicSuffixList, normalize_domain
from .rdns import filter_rdns_synthetic

IPAddress = Union[ipaddress.IPv4Address, ipaddress.IPv6Address]

VPN_PORTS = frozenset({500, 4500, 1194, 1701, 1723})


class DnsSource(str, enum.Enum):
    RESOLVER_CAPTURE = "resolver_capture"
    RDNS = "rdns"


@dataclass(frozen=True)
class FlowRecord:
    start: dt.datetime
    src_ip: IPAddress
    dst_ip: IPAddress
    transport: str
    src_port: int
    dst_port: int
    bytes: int

    def __post_init__(self):
        object.__setattr__(self, "src_ip", ipaddress.ip_address(self.src_ip))
        object.__setattr__(self, "dst_ip", ipaddress.ip_address(self.dst_ip))
        if self.transport not in ("udp", "tcp"):
            raise ValueError(f"transport must be udp or tcp, got {self.transport!r}")
        for port in (self.src_port, self.dst_port):
            if not 0 <= port <= 65535:
                raise ValueError(f"port out of range: {port}")
        if self.bytes < 0:
            raise ValueError("byte count must be non-negative")
        if self.start.tzinfo is None:
            object.__setattr__(self, "start", self.start.replace(tzinfo=dt.timezone.utc))


def _parse_time(text: str) -> dt.datetime:
    value = dt.datetime.fromisoformat(text.strip().replace("Z", "+00:00"))
    return value if value.tzinfo else value.replace(tzinfo=dt.timezone.utc)


def read_flows(path: Union[str, Path]) -> Iterator[FlowRecord]:
    """``start_iso8601,src_ip,dst_ip,transport,src_port,dst_port,bytes``; a header row is skipped."""
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or row[0].startswith("#") or (lineno == 1 and row[0].strip() == "start_iso8601"):
                continue
            try:
                start, src, dst, transport, sport, dport, nbytes = row
                yield FlowRecord(
                    _parse_time(start), src.strip(), dst.strip(), transport.strip().lower(),
                    int(sport), int(dport), int(nbytes),
                )
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from None


def write_flows(flows: Iterable[FlowRecord], path: Union[str, Path]):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["start_iso8601", "src_ip", "dst_ip", "transport", "src_port", "dst_port", "bytes"])
        for f in flows:
            out.writerow([
                f.start.isoformat().replace("+00:00", "Z"), f.src_ip, f.dst_ip, f.transport,
                f.src_port, f.dst_port, f.bytes,
            ])


class DnsMapping:
    """ip -> {(domain, source)}; domains are stored lower-case without a trailing dot."""

    def __init__(self):
        self._entries: dict[IPAddress, set[tuple[str, DnsSource]]] = defaultdict(set)

    def add(self, ip, domain: str, source: Union[str, DnsSource] = DnsSource.RESOLVER_CAPTURE):
        name = normalize_domain(domain)
        if name:
            self._entries[ipaddress.ip_address(ip)].add((name, DnsSource(source)))

    def entries(self, ip) -> frozenset[tuple[str, DnsSource]]:
        return frozenset(self._entries.get(ipaddress.ip_address(ip), ()))

    def domains(self, ip, source: Optional[DnsSource] = None) -> set[str]:
        return {d for d, s in self.entries(ip) if source is None or s is source}

    def ips(self) -> list[IPAddress]:
        return list(self._entries)

    def __len__(self):
        return sum(len(v) for v in self._entries.values())

    def without_synthetic_rdns(self) -> "DnsMapping":
        """Copy that drops reverse-DNS names spelling out their own address."""
        out = DnsMapping()
        for ip, entries in self._entries.items():
            for domain, source in entries:
                if source is DnsSource.RDNS and filter_rdns_synthetic(ip, domain):
                    continue
                out._entries[ip].add((domain, source))
        return out

    @classmethod
    def from_rows(cls, rows: Iterable[tuple[str, str, str]]) -> "DnsMapping":
        mapping = cls()
        for ip, domain, source in rows:
            mapping.add(ip, domain, source)
        return mapping

    @classmethod
    def load(cls, path: Union[str, Path]) -> "DnsMapping":
        """CSV ``ip,domain,source``; a header row is skipped."""
        mapping = cls()
        with open(path, newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), 1):
                if not row or row[0].startswith("#") or (lineno == 1 and row[0].strip() == "ip"):
                    continue
                try:
                    ip, domain, source = (c.strip() for c in row)
                    mapping.add(ip, domain, source)
                except ValueError as exc:
                    raise ValueError(f"{path}: line {lineno}: {exc}") from None
        return mapping


@dataclass(frozen=True)
class Hitlist:
    vpn_only: frozenset = frozenset()
    vpn_and_web: frozenset = frozenset()

    def __post_init__(self):
        if self.vpn_only & self.vpn_and_web:
            raise ValueError("hitlist sets must be disjoint")

    @property
    def detected(self) -> int:
        return len(self.vpn_only) + len(self.vpn_and_web)

    @property
    def web_share(self) -> float:
        """Fraction of VPN responders that also answer HTTP."""
        return len(self.vpn_and_web) / self.detected if self.detected else 0.0

    def save(self, path: Union[str, Path]):
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["ip", "category"])
            for ip in sorted(self.vpn_only, key=_ip_key):
                out.writerow([ip, "vpn_only"])
            for ip in sorted(self.vpn_and_web, key=_ip_key):
                out.writerow([ip, "vpn_and_web"])

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Hitlist":
        sets = {"vpn_only": set(), "vpn_and_web": set()}
        with open(path, newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), 1):
                if not row or row[0] == "ip" or row[0].startswith("#"):
                    continue
                category = row[1].strip() if len(row) > 1 else "vpn_only"
                if category not in sets:
                    raise ValueError(f"{path}: line {lineno}: unknown category {category!r}")
                sets[category].add(ipaddress.ip_address(row[0].strip()))
        return cls(frozenset(sets["vpn_only"]), frozenset(sets["vpn_and_web"]))


def _ip_key(ip):
    return (ip.version, int(ip))


def _detected_address(result) -> Optional[IPAddress]:
    if isinstance(result, Mapping):
        return ipaddress.ip_address(result["target_ip"]) if result.get("detected") else None
    return result.target.address if result.verdict.detected else None


def build_hitlist(scan_results: Iterable, web_responders: Iterable) -> Hitlist:
    """Split VPN responders by whether they also answered an HTTP request.

    ``scan_results`` may hold result objects or their NDJSON rows.
    """
    detected = {a for a in map(_detected_address, scan_results) if a is not None}
    web = {ipaddress.ip_address(w) for w in web_responders}
    return Hitlist(frozenset(detected - web), frozenset(detected & web))


def classify_port_based(flow: FlowRecord) -> bool:
    return flow.src_port in VPN_PORTS or flow.dst_port in VPN_PORTS


def domain_is_vpn(domain: str, suffixes: PublicSuffixList) -> bool:
    name = normalize_domain(domain)
    if name.startswith("www."):
        return False
    left, _ = suffixes.split(name)
    return "vpn" in left


def ip_is_vpn_by_domain(ip, dns: DnsMapping, suffixes: PublicSuffixList) -> bool:
    # several names per address: any qualifying one is enough
    return any(domain_is_vpn(d, suffixes) for d in dns.domains(ip))


def classify_domain_based(flow: FlowRecord, dns: DnsMapping, suffixes: PublicSuffixList) -> bool:
    return ip_is_vpn_by_domain(flow.src_ip, dns, suffixes) or ip_is_vpn_by_domain(flow.dst_ip, dns, suffixes)


@dataclass(frozen=True)
class ClassificationResult:
    flow: FlowRecord
    by_hitlist: bool
    by_port: bool
    by_domain: bool


def classify_flows(
    flows: Iterable[FlowRecord], hitlist: Hitlist, dns: DnsMapping, suffixes: PublicSuffixList
) -> Iterator[ClassificationResult]:
    domain_cache: dict[IPAddress, bool] = {}

    def by_domain(ip) -> bool:
        if ip not in domain_cache:
            domain_cache[ip] = ip_is_vpn_by_domain(ip, dns, suffixes)
        return domain_cache[ip]

    for flow in flows:
        yield ClassificationResult(
            flow,
            flow.src_ip in hitlist.vpn_only or flow.dst_ip in hitlist.vpn_only,
            classify_port_based(flow),
            by_domain(flow.src_ip) or by_domain(flow.dst_ip),
        )
