"""Seeded corpus generators shared by unit and acceptance tests."""
from __future__ import annotations

import ipaddress
import random
from dataclasses import dataclass

# -- domain names -------------------------------------------------------------------

_LABELS = ["vpn", "myvpn", "VPN", "openvpn", "vpngate", "mail", "host", "gw", "portal", "corp", "cdn",
           "www", "example", "isp", "remote", "vp-n", "v", "pn", "access", "a1", "city", "kawasaki"]
_SUFFIXES = ["com", "net", "org", "io", "de", "co.uk", "ac.uk", "gov.uk", "uk", "jp", "co.jp",
             "kawasaki.jp", "city.kawasaki.jp", "nakahara.kawasaki.jp", "github.io", "com.au", "au",
             "eu-west-1.compute.amazonaws.com", "compute.amazonaws.com", "amazonaws.com", "vpn", "internal",
             "test", "example"]


def domain_corpus(n: int = 1000, seed: int = 11) -> list[str]:
    rng = random.Random(seed)
    names = ["myvpn.example.com", "www.vpn.example.com", "vpn.host.co.uk", "vpn.com", "com", "co.uk",
             "vpn.co.uk", "host.vpn", "WWW.VPN.corp.de", "vpn.city.kawasaki.jp", "vpn.x.kawasaki.jp",
             "x.vpn.kawasaki.jp", "vpn.github.io", "myvpn.github.io", "wwwvpn.example.com", "www.example.com",
             "vpn.example.com.", "vpn.eu-west-1.compute.amazonaws.com", "ec2.vpn.eu-west-1.compute.amazonaws.com"]
    while len(names) < n:
        labels = [rng.choice(_LABELS) for _ in range(rng.randint(0, 3))]
        if rng.random() < 0.15:
            labels.insert(0, rng.choice(["www", "WWW", "www1", "wwwx"]))
        name = ".".join(labels + [rng.choice(_SUFFIXES)])
        if rng.random() < 0.1:
            name = name.upper()
        if rng.random() < 0.05:
            name += "."
        names.append(name)
    return names[:n]


# -- reverse DNS pairs ---------------------------------------------------------------

_OCTET_POOL = [0, 1, 2, 3, 4, 10, 16, 20, 99, 100, 127, 168, 172, 192, 200, 250, 255]


def _render(octets, rng) -> str:
    style = rng.choice(["dec", "dec-pad", "hex", "hexrun"])
    if style == "hexrun":
        return "".join(f"{o:02x}" for o in octets)
    if style == "hex":
        parts = [f"{o:02x}" for o in octets]
    elif style == "dec-pad":
        parts = [f"{o:03d}" for o in octets]
    else:
        parts = [str(o) for o in octets]
    seps = [rng.choice(".-_") for _ in range(3)]
    return parts[0] + "".join(s + p for s, p in zip(seps, parts[1:]))


def rdns_corpus(n: int = 10_000, seed: int = 13) -> list[tuple[str, str]]:
    rng = random.Random(seed)
    pairs = [("1.2.3.4", "host-1-2-3-4.net"), ("1.2.3.4", "vpn.corp.net"), ("10.0.0.1", "0a000001.isp.example"),
             ("2001:db8::1", "2001" + "0db8" + "0" * 23 + "1.v6.example"),
             ("2001:db8::1", ".".join(reversed(ipaddress.ip_address("2001:db8::1").exploded.replace(":", ""))) + ".ip6.arpa")]
    while len(pairs) < n:
        octets = [rng.choice(_OCTET_POOL) if rng.random() < 0.7 else rng.randrange(256) for _ in range(4)]
        ip = ".".join(map(str, octets))
        shown = octets[:]
        kind = rng.random()
        if kind < 0.35:
            rng.shuffle(shown)
        elif kind < 0.5:
            shown[rng.randrange(4)] = rng.randrange(256)  # one octet wrong
        elif kind < 0.6:
            shown = shown[:3]  # only three octets
        elif kind < 0.7:
            shown = [rng.randrange(256) for _ in range(4)]
        if kind < 0.7:
            body = _render(shown, rng) if len(shown) == 4 else "-".join(map(str, shown))
        elif kind < 0.85:
            body = rng.choice(["vpn", "mail", "host", "dyn", "pool"]) + str(rng.randrange(1000))
        else:
            body = "".join(rng.choice("0123456789abcdef") for _ in range(rng.randint(6, 12)))
        prefix = rng.choice(["", "host-", "ip", "dyn.", "x-", "pool_"])
        suffix = rng.choice([".isp.example", ".dsl.net", "-static.example.org", ".1.example", ".ab.example"])
        domain = prefix + body + suffix
        if rng.random() < 0.1:
            domain = domain.upper()
        pairs.append((ip, domain))
    return pairs[:n]


# -- parser fuzzing -----------------------------------------------------------------

@dataclass(frozen=True)
class FuzzCase:
    data: bytes
    derived: bool  # built from a canonical fixture (truncated or with flipped fields)
    how: str


def fuzz_corpus(canonical: list[bytes], n: int = 10_000, seed: int = 17, max_random: int = 65536) -> list[FuzzCase]:
    """Random buffers, truncations and field flips of ``canonical`` responses, plus the responses themselves."""
    rng = random.Random(seed)
    cases = [FuzzCase(c, True, "canonical") for c in canonical]
    while len(cases) < n:
        roll = rng.random()
        if roll < 0.4:
            size = rng.choice([0, 1, 2, 7, 8, 13, 14, 27, 28, 155, 156, 157]) if rng.random() < 0.3 else None
            if size is None:
                size = rng.randint(0, 600) if rng.random() < 0.97 else rng.randint(600, max_random)
            cases.append(FuzzCase(rng.randbytes(size), False, "random"))
        elif roll < 0.65:
            base = rng.choice(canonical)
            cut = rng.randrange(len(base) + 1)
            cases.append(FuzzCase(base[:cut], True, "truncate"))
        else:
            base = bytearray(rng.choice(canonical))
            for _ in range(rng.randint(1, 4)):
                pos = rng.randrange(len(base))
                mode = rng.random()
                if mode < 0.5:
                    base[pos] ^= 1 << rng.randrange(8)
                elif mode < 0.8:
                    base[pos] = rng.randrange(256)
                else:
                    base[pos:pos + 2] = rng.randbytes(2)
            if rng.random() < 0.2:
                base += rng.randbytes(rng.randint(1, 64))
            cases.append(FuzzCase(bytes(base), True, "flip"))
    return cases
