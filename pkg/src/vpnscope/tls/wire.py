"""Byte-level TLS (<= 1.2) and SSLv2 handshake framing.

Only the first flight is modelled: ClientHello out, ServerHello / Certificate /
ServerHelloDone (or an alert) back, plus heartbeat records. Nothing is encrypted.
"""
from __future__ import annotations

import random
import socket
import struct
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional

from .ciphers import TlsVersion

CT_CHANGE_CIPHER_SPEC = 20
CT_ALERT = 21
CT_HANDSHAKE = 22
CT_APPLICATION_DATA = 23
CT_HEARTBEAT = 24

HS_CLIENT_HELLO = 1
HS_SERVER_HELLO = 2
HS_CERTIFICATE = 11
HS_SERVER_KEY_EXCHANGE = 12
HS_SERVER_HELLO_DONE = 14

EXT_SERVER_NAME = 0
EXT_SUPPORTED_GROUPS = 10
EXT_EC_POINT_FORMATS = 11
EXT_SIGNATURE_ALGORITHMS = 13
EXT_HEARTBEAT = 15
EXT_RENEGOTIATION_INFO = 0xFF01

HEARTBEAT_REQUEST = 1
HEARTBEAT_RESPONSE = 2
HEARTBEAT_PEER_ALLOWED_TO_SEND = 1

ALERT_FATAL = 2
ALERT_HANDSHAKE_FAILURE = 40
ALERT_DECODE_ERROR = 50
ALERT_PROTOCOL_VERSION = 70
ALERT_UNRECOGNIZED_NAME = 112

ALERT_NAMES = {
    0: "close_notify",
    10: "unexpected_message",
    20: "bad_record_mac",
    40: "handshake_failure",
    47: "illegal_parameter",
    50: "decode_error",
    70: "protocol_version",
    71: "insufficient_security",
    80: "internal_error",
    112: "unrecognized_name",
}

SSL2_CLIENT_HELLO = 1
SSL2_SERVER_HELLO = 4

MAX_RECORD = 1 << 14

_GROUPS = (29, 23, 24)  # x25519, secp256r1, secp384r1
_SIGALGS = (0x0804, 0x0805, 0x0806, 0x0401, 0x0501, 0x0601, 0x0403, 0x0503, 0x0201, 0x0203)


class WireError(Exception):
    """Peer sent octets that do not frame as TLS."""


class Record(NamedTuple):
    content_type: int
    version: int
    payload: bytes


class ServerHello(NamedTuple):
    version: int
    random: bytes
    session_id: bytes
    cipher: int
    compression: int
    extensions: dict[int, bytes]


class ClientHello(NamedTuple):
    version: int
    random: bytes
    session_id: bytes
    ciphers: tuple[int, ...]
    compressions: bytes
    extensions: dict[int, bytes]

    @property
    def sni(self) -> Optional[str]:
        data = self.extensions.get(EXT_SERVER_NAME)
        if not data or len(data) < 5:
            return None
        # list length (2) | name type (1) | name length (2) | name
        (name_len,) = struct.unpack("!H", data[3:5])
        return data[5:5 + name_len].decode("ascii", "replace")


class Ssl2ServerHello(NamedTuple):
    version: int
    certificate: bytes
    cipher_specs: tuple[int, ...]


# -- encoding ---------------------------------------------------------------

def _u8_vec(data: bytes) -> bytes:
    return bytes([len(data)]) + data


def _u16_vec(data: bytes) -> bytes:
    return struct.pack("!H", len(data)) + data


def _u24(n: int) -> bytes:
    return struct.pack("!I", n)[1:]


def record(content_type: int, version: int, payload: bytes) -> bytes:
    out = b""
    for i in range(0, max(len(payload), 1), MAX_RECORD):
        chunk = payload[i:i + MAX_RECORD]
        out += struct.pack("!BHH", content_type, version, len(chunk)) + chunk
    return out


def handshake(msg_type: int, body: bytes) -> bytes:
    return bytes([msg_type]) + _u24(len(body)) + body


def encode_extensions(extensions: Iterable[tuple[int, bytes]]) -> bytes:
    return _u16_vec(b"".join(struct.pack("!H", t) + _u16_vec(d) for t, d in extensions))


def sni_extension(hostname: str) -> bytes:
    name = hostname.encode("idna")
    return _u16_vec(b"\x00" + _u16_vec(name))


def build_client_hello(
    max_version: int,
    ciphers: Iterable[int],
    *,
    sni: Optional[str] = None,
    heartbeat: bool = False,
    rng: Optional[random.Random] = None,
) -> bytes:
    """A complete ClientHello record offering ``ciphers`` up to ``max_version``."""
    rng = rng or random.SystemRandom()
    cipher_bytes = b"".join(struct.pack("!H", c) for c in ciphers)
    extensions: list[tuple[int, bytes]] = []
    if sni:
        extensions.append((EXT_SERVER_NAME, sni_extension(sni)))
    extensions += [
        (EXT_SUPPORTED_GROUPS, _u16_vec(b"".join(struct.pack("!H", g) for g in _GROUPS))),
        (EXT_EC_POINT_FORMATS, _u8_vec(b"\x00")),
    ]
    if max_version >= TlsVersion.TLS12:
        extensions.append((EXT_SIGNATURE_ALGORITHMS, _u16_vec(b"".join(struct.pack("!H", s) for s in _SIGALGS))))
    if heartbeat:
        extensions.append((EXT_HEARTBEAT, bytes([HEARTBEAT_PEER_ALLOWED_TO_SEND])))
    extensions.append((EXT_RENEGOTIATION_INFO, b"\x00"))

    body = (
        struct.pack("!H", max_version)
        + rng.randbytes(32)
        + _u8_vec(b"")
        + _u16_vec(cipher_bytes)
        + _u8_vec(b"\x00")
        + encode_extensions(extensions)
    )
    return record(CT_HANDSHAKE, min(max_version, TlsVersion.TLS10), handshake(HS_CLIENT_HELLO, body))


def build_server_hello(
    version: int, cipher: int, extensions: Iterable[tuple[int, bytes]] = (), rng: Optional[random.Random] = None
) -> bytes:
    rng = rng or random.SystemRandom()
    extensions = list(extensions)
    body = struct.pack("!H", version) + rng.randbytes(32) + _u8_vec(rng.randbytes(32)) + struct.pack("!HB", cipher, 0)
    if extensions:
        body += encode_extensions(extensions)
    return handshake(HS_SERVER_HELLO, body)


def build_certificate(chain: Iterable[bytes]) -> bytes:
    certs = b"".join(_u24(len(c)) + c for c in chain)
    return handshake(HS_CERTIFICATE, _u24(len(certs)) + certs)


def build_server_hello_done() -> bytes:
    return handshake(HS_SERVER_HELLO_DONE, b"")


def alert(version: int, description: int, level: int = ALERT_FATAL) -> bytes:
    return record(CT_ALERT, version, bytes([level, description]))


def heartbeat_message(msg_type: int, declared_length: int, payload: bytes = b"", padding: bytes = b"") -> bytes:
    return struct.pack("!BH", msg_type, declared_length) + payload + padding


def build_sslv2_client_hello(cipher_specs: Iterable[int], challenge: bytes) -> bytes:
    specs = b"".join(s.to_bytes(3, "big") for s in cipher_specs)
    body = struct.pack("!BHHHH", SSL2_CLIENT_HELLO, TlsVersion.SSL2, len(specs), 0, len(challenge)) + specs + challenge
    return struct.pack("!H", 0x8000 | len(body)) + body


def build_sslv2_server_hello(certificate: bytes, cipher_specs: Iterable[int], connection_id: bytes) -> bytes:
    specs = b"".join(s.to_bytes(3, "big") for s in cipher_specs)
    body = (
        struct.pack("!BBBHHHH", SSL2_SERVER_HELLO, 0, 1, TlsVersion.SSL2, len(certificate), len(specs), len(connection_id))
        + certificate + specs + connection_id
    )
    return struct.pack("!H", 0x8000 | len(body)) + body


# -- decoding ---------------------------------------------------------------

def parse_extensions(data: bytes) -> dict[int, bytes]:
    if len(data) < 2:
        return {}
    (total,) = struct.unpack("!H", data[:2])
    out: dict[int, bytes] = {}
    pos, end = 2, min(2 + total, len(data))
    while pos + 4 <= end:
        ext_type, length = struct.unpack("!HH", data[pos:pos + 4])
        out[ext_type] = data[pos + 4:pos + 4 + length]
        pos += 4 + length
    return out


def parse_server_hello(body: bytes) -> ServerHello:
    if len(body) < 38:
        raise WireError("ServerHello too short")
    version = struct.unpack("!H", body[:2])[0]
    sid_len = body[34]
    pos = 35 + sid_len
    if len(body) < pos + 3:
        raise WireError("ServerHello truncated")
    cipher, compression = struct.unpack("!HB", body[pos:pos + 3])
    return ServerHello(version, body[2:34], body[35:pos], cipher, compression, parse_extensions(body[pos + 3:]))


def parse_client_hello(body: bytes) -> ClientHello:
    try:
        version = struct.unpack("!H", body[:2])[0]
        rnd = body[2:34]
        pos = 34
        sid = body[pos + 1:pos + 1 + body[pos]]
        pos += 1 + body[pos]
        (clen,) = struct.unpack("!H", body[pos:pos + 2])
        ciphers = struct.unpack(f"!{clen // 2}H", body[pos + 2:pos + 2 + clen - clen % 2])
        pos += 2 + clen
        comps = body[pos + 1:pos + 1 + body[pos]]
        pos += 1 + body[pos]
    except (struct.error, IndexError) as exc:
        raise WireError("malformed ClientHello") from exc
    return ClientHello(version, rnd, sid, tuple(ciphers), comps, parse_extensions(body[pos:]))


def parse_certificate(body: bytes) -> list[bytes]:
    if len(body) < 3:
        raise WireError("Certificate message too short")
    total = int.from_bytes(body[:3], "big")
    pos, end, chain = 3, min(3 + total, len(body)), []
    while pos + 3 <= end:
        n = int.from_bytes(body[pos:pos + 3], "big")
        chain.append(body[pos + 3:pos + 3 + n])
        pos += 3 + n
    return chain


def parse_sslv2_server_hello(body: bytes) -> Ssl2ServerHello:
    if len(body) < 11 or body[0] != SSL2_SERVER_HELLO:
        raise WireError("not an SSLv2 SERVER-HELLO")
    _, _, _, version, cert_len, specs_len, _ = struct.unpack("!BBBHHHH", body[:11])
    cert = body[11:11 + cert_len]
    specs = body[11 + cert_len:11 + cert_len + specs_len]
    return Ssl2ServerHello(
        version, cert, tuple(int.from_bytes(specs[i:i + 3], "big") for i in range(0, len(specs) - 2, 3))
    )


def parse_sslv2_client_hello(body: bytes) -> tuple[int, tuple[int, ...]]:
    if len(body) < 9 or body[0] != SSL2_CLIENT_HELLO:
        raise WireError("not an SSLv2 CLIENT-HELLO")
    _, version, specs_len, _, _ = struct.unpack("!BHHHH", body[:9])
    specs = body[9:9 + specs_len]
    return version, tuple(int.from_bytes(specs[i:i + 3], "big") for i in range(0, len(specs) - 2, 3))


# -- socket helpers ---------------------------------------------------------

def recv_exact(sock: socket.socket, n: int) -> bytes:
    """Read exactly ``n`` octets; short on orderly EOF."""
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            break
        buf += chunk
    return bytes(buf)


def read_record(sock: socket.socket) -> Optional[Record]:
    header = recv_exact(sock, 5)
    if not header:
        return None
    if len(header) < 5:
        raise WireError("truncated record header")
    ctype, version, length = struct.unpack("!BHH", header)
    if ctype not in (CT_CHANGE_CIPHER_SPEC, CT_ALERT, CT_HANDSHAKE, CT_APPLICATION_DATA, CT_HEARTBEAT):
        raise WireError(f"unknown content type {ctype}")
    if length > MAX_RECORD + 2048:
        raise WireError(f"oversized record {length}")
    payload = recv_exact(sock, length)
    if len(payload) < length:
        raise WireError("truncated record")
    return Record(ctype, version, payload)


def read_sslv2_message(sock: socket.socket) -> Optional[bytes]:
    header = recv_exact(sock, 2)
    if not header:
        return None
    if len(header) < 2 or not header[0] & 0x80:
        raise WireError("not an SSLv2 record")
    length = ((header[0] & 0x7F) << 8) | header[1]
    body = recv_exact(sock, length)
    if len(body) < length:
        raise WireError("truncated SSLv2 record")
    return body


@dataclass
class HandshakeBuffer:
    """Reassembles handshake messages that span or share records."""

    data: bytearray = field(default_factory=bytearray)

    def feed(self, payload: bytes) -> list[tuple[int, bytes]]:
        self.data += payload
        out = []
        while len(self.data) >= 4:
            length = int.from_bytes(self.data[1:4], "big")
            if len(self.data) < 4 + length:
                break
            out.append((self.data[0], bytes(self.data[4:4 + length])))
            del self.data[:4 + length]
        return out


@dataclass
class ServerFlight:
    """What a client saw in response to its hello."""

    server_hello: Optional[ServerHello] = None
    certificates: list[bytes] = field(default_factory=list)
    done: bool = False
    alert: Optional[tuple[int, int]] = None
    closed: bool = False

    @property
    def alert_name(self) -> Optional[str]:
        if self.alert is None:
            return None
        return ALERT_NAMES.get(self.alert[1], str(self.alert[1]))


def read_server_flight(sock: socket.socket, stop_after_hello: bool = False) -> ServerFlight:
    """Read records until ServerHelloDone (or ServerHello), an alert or EOF.

    Socket timeouts propagate to the caller.
    """
    flight = ServerFlight()
    buf = HandshakeBuffer()
    while not flight.done:
        rec = read_record(sock)
        if rec is None:
            flight.closed = True
            break
        if rec.content_type == CT_ALERT:
            if len(rec.payload) >= 2:
                flight.alert = (rec.payload[0], rec.payload[1])
            break
        if rec.content_type != CT_HANDSHAKE:
            raise WireError(f"unexpected content type {rec.content_type} during handshake")
        for msg_type, body in buf.feed(rec.payload):
            if msg_type == HS_SERVER_HELLO:
                flight.server_hello = parse_server_hello(body)
                if stop_after_hello:
                    return flight
            elif msg_type == HS_CERTIFICATE:
                flight.certificates = parse_certificate(body)
            elif msg_type == HS_SERVER_HELLO_DONE:
                flight.done = True
    return flight
