"""OpenVPN control-channel hard-reset packets.

Layout without tls-auth::

    opcode/key-id (1) | session id (8) | ack count (1) | [acks, remote session] | packet id (4)

With an HMAC field the session id is followed by hmac (20), replay packet id (4) and
net time (4) before the ack array.
"""
from __future__ import annotations

import random
import struct
import time
from typing import NamedTuple, Optional

from .base import (
    DetectionVerdict,
    HmacMode,
    KeyMethod,
    ProbePayload,
    Protocol,
    Transport,
    default_rng,
)

P_CONTROL_HARD_RESET_CLIENT_V1 = 1
P_CONTROL_HARD_RESET_SERVER_V1 = 2
P_CONTROL_V1 = 4
P_ACK_V1 = 5
P_CONTROL_HARD_RESET_CLIENT_V2 = 7
P_CONTROL_HARD_RESET_SERVER_V2 = 8

CLIENT_RESET = {KeyMethod.KM1: P_CONTROL_HARD_RESET_CLIENT_V1, KeyMethod.KM2: P_CONTROL_HARD_RESET_CLIENT_V2}
SERVER_RESET = {P_CONTROL_HARD_RESET_SERVER_V1: KeyMethod.KM1, P_CONTROL_HARD_RESET_SERVER_V2: KeyMethod.KM2}

HMAC_SHA1_LEN = 20
MIN_PACKET_LEN = 14


class ControlPacket(NamedTuple):
    opcode: int
    key_id: int
    session_id: bytes
    hmac: bytes
    acks: tuple[int, ...]
    remote_session_id: Optional[bytes]
    packet_id: int


def encode_control(
    opcode: int,
    session_id: bytes,
    packet_id: int = 0,
    acks: tuple[int, ...] = (),
    remote_session_id: Optional[bytes] = None,
    hmac: bytes = b"",
    replay_id: int = 1,
    net_time: int = 0,
    key_id: int = 0,
) -> bytes:
    out = bytes([(opcode << 3) | (key_id & 0x7)]) + session_id
    if hmac:
        out += hmac + struct.pack("!II", replay_id, net_time)
    out += bytes([len(acks)])
    if acks:
        out += b"".join(struct.pack("!I", a) for a in acks) + (remote_session_id or bytes(8))
    return out + struct.pack("!I", packet_id)


def decode_control(packet: bytes, hmac_len: int = 0) -> Optional[ControlPacket]:
    """Decode one control packet; ``None`` when the octets do not fit the layout."""
    if len(packet) < 10:
        return None
    opcode, key_id = packet[0] >> 3, packet[0] & 0x7
    session_id = packet[1:9]
    pos = 9
    hmac = b""
    if hmac_len:
        if len(packet) < pos + hmac_len + 8:
            return None
        hmac = packet[pos:pos + hmac_len]
        pos += hmac_len + 8
    if len(packet) < pos + 1:
        return None
    n_acks = packet[pos]
    pos += 1
    acks: tuple[int, ...] = ()
    remote = None
    if n_acks:
        end = pos + 4 * n_acks + 8
        if len(packet) < end:
            return None
        acks = struct.unpack(f"!{n_acks}I", packet[pos:pos + 4 * n_acks])
        remote = packet[end - 8:end]
        pos = end
    if len(packet) < pos + 4:
        return None
    (packet_id,) = struct.unpack("!I", packet[pos:pos + 4])
    return ControlPacket(opcode, key_id, session_id, hmac, acks, remote, packet_id)


def frame_tcp(packet: bytes) -> bytes:
    return struct.pack("!H", len(packet)) + packet


def unframe_tcp(data: bytes) -> Optional[bytes]:
    if len(data) < 2:
        return None
    (length,) = struct.unpack("!H", data[:2])
    if len(data) < 2 + length:
        return None
    return data[2:2 + length]


def build_openvpn_probe(
    transport: Transport = Transport.UDP,
    key_method: KeyMethod = KeyMethod.KM2,
    hmac: HmacMode = HmacMode.NONE,
    rng: Optional[random.Random] = None,
    net_time: Optional[int] = None,
) -> ProbePayload:
    transport, key_method, hmac = Transport(transport), KeyMethod(key_method), HmacMode(hmac)
    rng = default_rng(rng)
    session_id = rng.randbytes(8)
    if hmac is HmacMode.RANDOM:
        if net_time is None:
            net_time = int(time.time())
        packet = encode_control(
            CLIENT_RESET[key_method], session_id, hmac=rng.randbytes(HMAC_SHA1_LEN), net_time=net_time
        )
    else:
        packet = encode_control(CLIENT_RESET[key_method], session_id)
    if transport is Transport.TCP:
        packet = frame_tcp(packet)
    variant = f"{transport.value}/{key_method.value}/hmac-{hmac.value}"
    return ProbePayload(Protocol.OPENVPN, packet, variant=variant, transport=transport)


def probe_session_id(probe: ProbePayload) -> bytes:
    packet = probe.data[2:] if probe.transport is Transport.TCP else probe.data
    return packet[1:9]


def parse_openvpn_response(probe: ProbePayload, data: bytes) -> DetectionVerdict:
    if probe.protocol is not Protocol.OPENVPN:
        raise ValueError("probe is not an OpenVPN probe")
    packet = data
    evidence = []
    if probe.transport is Transport.TCP:
        packet = unframe_tcp(data)
        if packet is None:
            return DetectionVerdict.negative(Protocol.OPENVPN, "short read", data)
        evidence.append("tcp length framing")
    if len(packet) < MIN_PACKET_LEN:
        return DetectionVerdict.negative(Protocol.OPENVPN, "short read", data)

    opcode = packet[0] >> 3
    if opcode not in SERVER_RESET:
        return DetectionVerdict.negative(Protocol.OPENVPN, f"opcode {opcode} is not a server hard reset", data)
    hmac_len = HMAC_SHA1_LEN if probe.variant.endswith(HmacMode.RANDOM.value) else 0
    decoded = decode_control(packet, hmac_len) or decode_control(packet)
    if decoded is None:
        return DetectionVerdict.negative(Protocol.OPENVPN, "malformed control packet", data)
    if decoded.remote_session_id != probe_session_id(probe):
        return DetectionVerdict.negative(Protocol.OPENVPN, "session id not acknowledged", data)

    key_method = SERVER_RESET[opcode]
    version = "v1" if key_method is KeyMethod.KM1 else "v2"
    evidence += [f"server hard-reset {version}", "probe session acknowledged"]
    return DetectionVerdict(True, Protocol.OPENVPN, evidence, key_method=key_method, raw_excerpt=data)


def response_complete(buffer: bytes) -> bool:
    return unframe_tcp(buffer) is not None
