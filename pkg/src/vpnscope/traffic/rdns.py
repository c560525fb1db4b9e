"""Detection of reverse-DNS names that merely spell out their own address.

Such names (``host-1-2-3-4.isp.net``, ``0a000001.example``) say nothing about the
service and are dropped before the domain-based rule runs.
"""
from __future__ import annotations

import ipaddress
import re
from collections import Counter
from typing import Union

_SEPARATORS = re.compile(r"[._-]")
_HEX8 = re.compile(r"(?=([0-9a-f]{8}))")
_HEX32 = re.compile(r"(?=([0-9a-f]{32}))")


def _segments(domain: str) -> list[str]:
    return _SEPARATORS.split(domain.lower())


def _decimal(segment: str):
    if segment.isdigit() and len(segment) <= 3 and int(segment) <= 255:
        return int(segment)
    return None


def _hex(segment: str):
    if len(segment) == 2 and all(c in "0123456789abcdef" for c in segment):
        return int(segment, 16)
    return None


def _v4_synthetic(octets: Counter, domain: str) -> bool:
    segments = _segments(domain)
    # four consecutive segments that, read as decimal or as hex pairs, are the octets in some order
    for i in range(len(segments) - 3):
        window = segments[i:i + 4]
        for decode in (_decimal, _hex):
            values = [decode(s) for s in window]
            if None not in values and Counter(values) == octets:
                return True
    # eight contiguous hex digits spelling the octets in some order
    for match in _HEX8.finditer(domain.lower()):
        run = match.group(1)
        if Counter(bytes.fromhex(run)) == octets:
            return True
    return False


def _v6_synthetic(address: ipaddress.IPv6Address, domain: str) -> bool:
    nibbles = address.exploded.replace(":", "")
    lowered = domain.lower()
    if any(m.group(1) == nibbles for m in _HEX32.finditer(lowered)):
        return True
    reversed_form = ".".join(reversed(nibbles))
    return reversed_form in lowered


def filter_rdns_synthetic(ip: Union[str, ipaddress.IPv4Address, ipaddress.IPv6Address], domain: str) -> bool:
    """True when ``domain`` encodes the address ``ip`` and should be excluded.

    IPv4: all four octets, in any order, as decimal or two-digit hex segments
    (separators ``.``, ``-``, ``_``) or as one eight-digit hex run.
    IPv6: the 32-nibble address as one hex run or in nibble-reversed dotted form.
    """
    address = ipaddress.ip_address(ip)
    if address.version == 6:
        return _v6_synthetic(address, domain)
    return _v4_synthetic(Counter(address.packed), domain)
