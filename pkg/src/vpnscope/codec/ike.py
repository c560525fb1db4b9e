"""ISAKMP / IKEv1 Main Mode initiation probe."""
from __future__ import annotations

import random
import struct
from typing import NamedTuple, Optional

from .base import DetectionVerdict, ProbePayload, Protocol, default_rng, nonzero_bytes

HEADER_LEN = 28
ISAKMP_VERSION = 0x10  # major 1, minor 0

# next-payload codes
NP_NONE = 0
NP_SA = 1
NP_PROPOSAL = 2
NP_TRANSFORM = 3
NP_NOTIFICATION = 11
NP_VENDOR_ID = 13

EXCHANGE_IDENTITY_PROTECTION = 2
DOI_IPSEC = 1
SIT_IDENTITY_ONLY = 1
PROTO_ISAKMP = 1
KEY_IKE = 1

# SA attribute types (basic / TV encoded)
ATTR_ENCRYPTION = 1
ATTR_HASH = 2
ATTR_AUTH = 3
ATTR_GROUP = 4
ATTR_LIFE_TYPE = 11
ATTR_LIFE_DURATION = 12
ATTR_KEY_LENGTH = 14

ENC_DES, ENC_3DES, ENC_AES = 1, 5, 7
HASH_MD5, HASH_SHA1, HASH_SHA256, HASH_SHA384 = 1, 2, 4, 5
AUTH_PSK = 1
LIFE_SECONDS = 1
LIFETIME = 28800


class IkeTransform(NamedTuple):
    encryption: int
    key_length: Optional[int]
    hash: int
    group: int


# Spread from legacy to modern so that as many responders as possible find an acceptable suite.
DEFAULT_TRANSFORMS: tuple[IkeTransform, ...] = (
    IkeTransform(ENC_3DES, None, HASH_SHA1, 2),
    IkeTransform(ENC_AES, 128, HASH_SHA1, 2),
    IkeTransform(ENC_AES, 128, HASH_SHA256, 14),
    IkeTransform(ENC_AES, 256, HASH_SHA1, 5),
    IkeTransform(ENC_AES, 256, HASH_SHA256, 14),
    IkeTransform(ENC_DES, None, HASH_MD5, 1),
    IkeTransform(ENC_AES, 256, HASH_SHA384, 14),
)


class IsakmpHeader(NamedTuple):
    initiator_cookie: bytes
    responder_cookie: bytes
    next_payload: int
    version: int
    exchange_type: int
    flags: int
    message_id: int
    length: int


def parse_header(data: bytes) -> Optional[IsakmpHeader]:
    if len(data) < HEADER_LEN:
        return None
    return IsakmpHeader(data[0:8], data[8:16], *struct.unpack("!BBBBII", data[16:28]))


def _tv(attr_type: int, value: int) -> bytes:
    return struct.pack("!HH", 0x8000 | attr_type, value)


def encode_transform(number: int, transform: IkeTransform, last: bool) -> bytes:
    attrs = _tv(ATTR_ENCRYPTION, transform.encryption)
    if transform.key_length is not None:
        attrs += _tv(ATTR_KEY_LENGTH, transform.key_length)
    attrs += (
        _tv(ATTR_HASH, transform.hash)
        + _tv(ATTR_AUTH, AUTH_PSK)
        + _tv(ATTR_GROUP, transform.group)
        + _tv(ATTR_LIFE_TYPE, LIFE_SECONDS)
        + _tv(ATTR_LIFE_DURATION, LIFETIME)
    )
    next_payload = NP_NONE if last else NP_TRANSFORM
    length = 8 + len(attrs)
    return struct.pack("!BBHBBH", next_payload, 0, length, number, KEY_IKE, 0) + attrs


def encode_sa_payload(transforms: tuple[IkeTransform, ...]) -> bytes:
    body = b"".join(
        encode_transform(i + 1, t, last=(i == len(transforms) - 1)) for i, t in enumerate(transforms)
    )
    proposal = struct.pack("!BBHBBBB", NP_NONE, 0, 8 + len(body), 1, PROTO_ISAKMP, 0, len(transforms)) + body
    sa_len = 12 + len(proposal)
    return struct.pack("!BBHII", NP_NONE, 0, sa_len, DOI_IPSEC, SIT_IDENTITY_ONLY) + proposal


def build_ike_probe(
    rng: Optional[random.Random] = None,
    transforms: tuple[IkeTransform, ...] = DEFAULT_TRANSFORMS,
) -> ProbePayload:
    """Main Mode SA proposal offering every suite in ``transforms``.

    The initiator cookie is the only randomized field.
    """
    cookie = nonzero_bytes(default_rng(rng), 8)
    sa = encode_sa_payload(transforms)
    length = HEADER_LEN + len(sa)
    header = cookie + bytes(8) + struct.pack(
        "!BBBBII", NP_SA, ISAKMP_VERSION, EXCHANGE_IDENTITY_PROTECTION, 0, 0, length
    )
    return ProbePayload(Protocol.IKE, header + sa, variant=f"main-mode/{len(transforms)}-transforms")


def parse_ike_response(probe: ProbePayload, data: bytes) -> DetectionVerdict:
    if probe.protocol is not Protocol.IKE:
        raise ValueError("probe is not an IKE probe")
    header = parse_header(data)
    if header is None:
        return DetectionVerdict.negative(Protocol.IKE, "short read", data)

    evidence = []
    ok = True
    if header.initiator_cookie == probe.data[:8]:
        evidence.append("initiator-cookie echoed")
    else:
        ok = False
        evidence.append("cookie mismatch")
    if any(header.responder_cookie):
        evidence.append("responder-cookie nonzero")
    else:
        ok = False
        evidence.append("responder-cookie zero")
    if header.next_payload == NP_SA:
        evidence.append("next-payload SA")
    elif header.next_payload == NP_NOTIFICATION:
        evidence.append("next-payload Notification")
    else:
        ok = False
        evidence.append(f"unexpected next-payload {header.next_payload}")
    return DetectionVerdict(ok, Protocol.IKE, evidence, raw_excerpt=data)


def count_transforms(packet: bytes) -> int:
    """Number of transforms in the first proposal of the SA payload following the header."""
    header = parse_header(packet)
    if header is None or header.next_payload != NP_SA:
        return 0
    # SA generic header (4) + DOI (4) + situation (4), then proposal header: count at offset 7
    offset = HEADER_LEN + 12
    if len(packet) < offset + 8:
        return 0
    return packet[offset + 7]


__all__ = [
    "DEFAULT_TRANSFORMS",
    "HEADER_LEN",
    "IkeTransform",
    "IsakmpHeader",
    "build_ike_probe",
    "count_transforms",
    "parse_header",
    "parse_ike_response",
]
