"""Address metadata: longest-prefix ASN/country lookup and rDNS domain ranking."""
from __future__ import annotations

import csv
import ipaddress
from collections import Counter
from pathlib import Path
from typing import Iterable, Optional, Union

from .classify import DnsMapping, DnsSource
from .psl import PublicSuffixList


class PrefixTable:
    """Prefix -> (asn, country) with longest-prefix lookup.

    Two entries for the same prefix are ambiguous and rejected.
    """

    def __init__(self, entries: Iterable[tuple[str, Optional[int], Optional[str]]] = ()):
        self._by_len: dict[tuple[int, int], dict[int, tuple]] = {}
        for cidr, asn, country in entries:
            self.add(cidr, asn, country)

    def add(self, cidr: str, asn: Optional[int], country: Optional[str]):
        net = ipaddress.ip_network(cidr, strict=True)
        table = self._by_len.setdefault((net.version, net.prefixlen), {})
        key = int(net.network_address)
        if key in table:
            raise ValueError(f"duplicate prefix {net}")
        table[key] = (asn, country)

    def lookup(self, ip) -> tuple[Optional[int], Optional[str]]:
        address = ipaddress.ip_address(ip)
        bits = address.max_prefixlen
        value = int(address)
        for version, length in sorted(self._by_len, key=lambda k: -k[1]):
            if version != address.version:
                continue
            masked = value >> (bits - length) << (bits - length) if length else 0
            hit = self._by_len[(version, length)].get(masked)
            if hit is not None:
                return hit
        return None, None

    @classmethod
    def load(cls, path: Union[str, Path]) -> "PrefixTable":
        """CSV ``cidr,asn,country``; empty cells mean unknown."""
        table = cls()
        with open(path, newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), 1):
                if not row or row[0].startswith("#") or row[0] == "cidr":
                    continue
                try:
                    cidr, asn, country = (c.strip() for c in row)
                    table.add(cidr, int(asn) if asn else None, country or None)
                except ValueError as exc:
                    raise ValueError(f"{path}: line {lineno}: {exc}") from None
        return table


def enrich_prefix(ip, table: PrefixTable) -> tuple[Optional[int], Optional[str]]:
    return table.lookup(ip)


def rank_rdns_domains(
    dns: DnsMapping,
    detected_ips: Iterable,
    suffixes: PublicSuffixList,
    substring: Optional[str] = None,
    source: Optional[DnsSource] = DnsSource.RDNS,
) -> list[tuple[str, int]]:
    """Registrable domains ranked by how many detected addresses map into them."""
    counts: Counter = Counter()
    for ip in set(map(ipaddress.ip_address, detected_ips)):
        slds = {suffixes.registrable_domain(d) for d in dns.domains(ip, source)}
        slds.discard(None)
        if substring:
            slds = {s for s in slds if substring.lower() in s}
        counts.update(slds)
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
