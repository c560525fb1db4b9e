"""Vendor aggregation from PPTP/SSTP verdicts and a TCP-connect port sweep."""
from __future__ import annotations

import csv
import io
import ipaddress
import random
import socket
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .codec.base import Protocol
from .scan.ratelimit import TokenBucket

DEFAULT_PORTS = (21, 22, 25, 53, 80, 110, 143, 443, 445, 993, 995, 1194, 1723, 3389, 8000, 8080, 8443)
NO_VENDOR = "(none)"


@dataclass
class VendorDistribution:
    protocol: str
    entries: list[tuple[str, int, float]] = field(default_factory=list)
    other_vendors: int = 0
    other_count: int = 0
    other_share: float = 0.0
    total: int = 0

    def to_json(self) -> dict:
        return {
            "protocol": self.protocol,
            "total": self.total,
            "entries": [{"vendor": v, "count": c, "share": s} for v, c, s in self.entries],
            "other": {"vendors": self.other_vendors, "count": self.other_count, "share": self.other_share},
        }


def _vendor_of(item) -> tuple[Optional[str], bool, Optional[str]]:
    """(protocol, detected, vendor) from a verdict, a scan result or an NDJSON row."""
    if isinstance(item, Mapping):
        return item.get("protocol"), bool(item.get("detected")), item.get("vendor")
    verdict = getattr(item, "verdict", item)
    return verdict.protocol.value, verdict.detected, verdict.vendor


def vendor_distribution(verdicts: Iterable, protocol, top_n: int = 10) -> VendorDistribution:
    """Rank vendor strings of detected servers; everything past ``top_n`` goes to the other bucket.

    Detected servers without a vendor string are counted under ``NO_VENDOR``.
    """
    protocol = Protocol(protocol).value
    counts: Counter = Counter()
    for item in verdicts:
        proto, detected, vendor = _vendor_of(item)
        if proto == protocol and detected:
            counts[vendor or NO_VENDOR] += 1
    total = sum(counts.values())
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    dist = VendorDistribution(protocol, total=total)
    if not total:
        return dist
    dist.entries = [(v, c, c / total) for v, c in ranked[:top_n]]
    rest = ranked[top_n:]
    dist.other_vendors = len(rest)
    dist.other_count = sum(c for _, c in rest)
    dist.other_share = dist.other_count / total
    return dist


@dataclass(frozen=True)
class PortSweepResult:
    target: ipaddress.IPv4Address
    open_ports: frozenset
    scanned_ports: tuple

    def __post_init__(self):
        if not self.open_ports <= set(self.scanned_ports):
            raise ValueError("open ports must be a subset of the scanned ports")


def _is_open(address: str, port: int, timeout: float) -> bool:
    try:
        with socket.create_connection((address, port), timeout=timeout):
            return True
    except OSError:
        return False


def port_sweep(
    target,
    port_list: Sequence[int],
    timeout: float = 1.0,
    rng: Optional[random.Random] = None,
    limiter: Optional[TokenBucket] = None,
) -> PortSweepResult:
    """TCP-connect each port once, in random order; any error counts as closed."""
    ports = sorted(set(port_list))
    if not ports:
        raise ValueError("port list must be non-empty")
    (rng or random.Random()).shuffle(ports)
    address = ipaddress.ip_address(target)
    opened = set()
    for port in ports:
        if limiter:
            limiter.acquire()
        if _is_open(str(address), port, timeout):
            opened.add(port)
    return PortSweepResult(address, frozenset(opened), tuple(ports))


def sweep_hosts(
    targets: Iterable,
    port_list: Sequence[int] = DEFAULT_PORTS,
    timeout: float = 1.0,
    seed: int = 0,
    workers: int = 16,
    limiter: Optional[TokenBucket] = None,
) -> list[PortSweepResult]:
    targets = sorted({ipaddress.ip_address(t) for t in targets}, key=lambda a: (a.version, int(a)))

    def one(address):
        return port_sweep(address, port_list, timeout, random.Random(f"{seed}:{address}"), limiter)

    if workers <= 1:
        return [one(t) for t in targets]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, targets))


@dataclass
class PortHeatmap:
    protocols: list[str]
    ports: list[int]
    shares: np.ndarray  # protocols x ports, fraction of swept hosts with the port open
    hosts: dict[str, int]

    def cell(self, protocol: str, port: int) -> float:
        return float(self.shares[self.protocols.index(protocol), self.ports.index(port)])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["protocol", "hosts", *self.ports])
        for i, proto in enumerate(self.protocols):
            writer.writerow([proto, self.hosts[proto], *(f"{v:.6f}" for v in self.shares[i])])
        return buf.getvalue()


def port_heatmap(sweeps: Mapping[str, Sequence[PortSweepResult]], ports: Optional[Sequence[int]] = None) -> PortHeatmap:
    """Share of swept hosts per protocol with each port open. Protocols without hosts are left out."""
    rows = {proto: list(results) for proto, results in sweeps.items() if results}
    if ports is None:
        ports = sorted({p for results in rows.values() for r in results for p in r.scanned_ports})
    ports = list(ports)
    protocols = sorted(rows)
    shares = np.zeros((len(protocols), len(ports)))
    for i, proto in enumerate(protocols):
        for r in rows[proto]:
            for j, port in enumerate(ports):
                shares[i, j] += port in r.open_ports
        shares[i] /= len(rows[proto])
    return PortHeatmap(protocols, ports, shares, {p: len(rows[p]) for p in protocols})


def load_port_list(text: str) -> list[int]:
    """Ports separated by commas or whitespace, ``#`` comments allowed."""
    ports = []
    for line in text.splitlines():
        for token in line.split("#", 1)[0].replace(",", " ").split():
            port = int(token)
            if not 1 <= port <= 65535:
                raise ValueError(f"port out of range: {port}")
            ports.append(port)
    return ports
