"""Target and blocklist files: one address or CIDR per line, ``#`` comments."""
from __future__ import annotations

import ipaddress
import math
import random
from pathlib import Path
from typing import Iterable, Iterator, Sequence, Union

Network = Union[ipaddress.IPv4Network, ipaddress.IPv6Network]
Address = Union[ipaddress.IPv4Address, ipaddress.IPv6Address]


class TargetFileError(ValueError):
    pass


def parse_networks(lines: Iterable[str], source: str = "<input>") -> list[Network]:
    networks = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            networks.append(ipaddress.ip_network(line, strict=False))
        except ValueError as exc:
            raise TargetFileError(f"{source}: line {lineno}: {exc}") from None
    return networks


def read_networks(path: Union[str, Path]) -> list[Network]:
    path = Path(path)
    with path.open() as fh:
        return parse_networks(fh, str(path))


def load_blocklist(path: Union[str, Path, None]) -> list[Network]:
    return read_networks(path) if path else []


def is_blocked(address: Address, blocklist: Sequence[Network]) -> bool:
    return any(address.version == net.version and address in net for net in blocklist)


class TargetSequence:
    """Addresses of a list of networks, visited in a seeded pseudorandom order.

    The permutation is an affine map ``i -> (a*i + b) mod N`` with ``a`` coprime to
    ``N``, so the order is reproducible and no address list is ever materialized.
    """

    def __init__(self, networks: Sequence[Network], seed: int = 0, blocklist: Sequence[Network] = ()):
        self.networks = list(networks)
        self.blocklist = list(blocklist)
        self.sizes = [net.num_addresses for net in self.networks]
        self.total = sum(self.sizes)
        rng = random.Random(seed)
        if self.total > 1:
            a = rng.randrange(1, self.total)
            while math.gcd(a, self.total) != 1:
                a = rng.randrange(1, self.total)
            self.mult, self.offset = a, rng.randrange(self.total)
        else:
            self.mult, self.offset = 1, 0

    def _nth(self, index: int) -> Address:
        for net, size in zip(self.networks, self.sizes):
            if index < size:
                return net.network_address + index
            index -= size
        raise IndexError(index)

    def __iter__(self) -> Iterator[Address]:
        for i in range(self.total):
            addr = self._nth((self.mult * i + self.offset) % self.total)
            if not is_blocked(addr, self.blocklist):
                yield addr

    def __len__(self) -> int:
        return sum(1 for _ in self)


def load_targets(path: Union[str, Path], seed: int = 0, blocklist: Sequence[Network] = ()) -> TargetSequence:
    """Expand the target file into a lazily permuted address sequence; malformed lines raise with their number."""
    return TargetSequence(read_networks(path), seed, blocklist)
