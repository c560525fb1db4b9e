import random
import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scapy.layers.isakmp import ISAKMP, ISAKMP_payload_SA
from scapy.layers.pptp import PPTP, PPTPStartControlConnectionRequest

from conftest import fixture_bytes, fixture_rng
from oracles import ike_oracle, openvpn_oracle, pptp_oracle, pptp_vendor_oracle, sstp_oracle
from vpnscope.codec import (
    DetectionVerdict,
    KeyMethod,
    ProbePayload,
    Protocol,
    Transport,
    TransportTarget,
    build_http_get,
    build_ike_probe,
    build_openvpn_probe,
    build_pptp_probe,
    build_sstp_request,
    classify_web_response,
    dumps_hex,
    loads_hex,
    parse_ike_response,
    parse_openvpn_response,
    parse_pptp_response,
    parse_response,
    parse_sstp_response,
    response_complete,
)
from vpnscope.codec import ike, openvpn, pptp
from vpnscope.codec.http import parse_status


# -- fixtures on disk match what the builders produce ------------------------------

def test_probe_fixtures_reproduce():
    assert build_ike_probe(fixture_rng()).data == fixture_bytes("ike", "probe_main_mode.hex")
    assert build_pptp_probe().data == fixture_bytes("pptp", "probe_sccrq.hex")
    for transport in ("udp", "tcp"):
        for km in ("km1", "km2"):
            probe = build_openvpn_probe(transport, km, "none", fixture_rng())
            assert probe.data == fixture_bytes("openvpn", f"probe_{transport}_{km}.hex")
    assert build_sstp_request("vpn.example.test", fixture_rng()).data == fixture_bytes("sstp", "probe_duplex_post.hex")


# -- IKE ----------------------------------------------------------------------------

def test_ike_probe_dissects_with_scapy():
    probe = build_ike_probe(random.Random(1))
    pkt = ISAKMP(probe.data)
    assert pkt.init_cookie == probe.data[:8]
    assert pkt.resp_cookie == bytes(8)
    assert pkt.exch_type == 2 and pkt.next_payload == 1
    assert pkt.length == len(probe.data)
    sa = pkt[ISAKMP_payload_SA]
    assert sa.prop.trans_nb == len(ike.DEFAULT_TRANSFORMS) == 7
    assert ike.count_transforms(probe.data) == 7


def test_ike_cookie_nonzero_and_seeded():
    a = build_ike_probe(random.Random(3)).data
    assert a == build_ike_probe(random.Random(3)).data
    assert 0 not in a[:8]
    assert a[:8] != build_ike_probe(random.Random(4)).data[:8]
    # everything after the cookie is fixed
    assert a[8:] == build_ike_probe(random.Random(4)).data[8:]


@pytest.mark.parametrize("name,expected", [
    ("response_sa", True),
    ("response_notify", True),
    ("negative_cookie_mismatch", False),
])
def test_ike_fixture_responses(name, expected):
    probe = build_ike_probe(fixture_rng())
    data = fixture_bytes("ike", f"{name}.hex")
    verdict = parse_ike_response(probe, data)
    assert verdict.detected is expected is ike_oracle(probe.data, data)
    if not expected:
        assert "cookie mismatch" in verdict.evidence


def test_ike_zero_responder_cookie_rejected():
    probe = build_ike_probe(fixture_rng())
    data = bytearray(fixture_bytes("ike", "response_sa.hex"))
    data[8:16] = bytes(8)
    verdict = parse_ike_response(probe, bytes(data))
    assert not verdict.detected and "responder-cookie zero" in verdict.evidence


def test_ike_short_read():
    probe = build_ike_probe(fixture_rng())
    verdict = parse_ike_response(probe, b"\x00" * 27)
    assert not verdict.detected and verdict.evidence == ["short read"]


def test_ike_parser_refuses_foreign_probe():
    with pytest.raises(ValueError):
        parse_ike_response(build_pptp_probe(), b"")


# -- PPTP ---------------------------------------------------------------------------

def test_pptp_probe_dissects_with_scapy():
    data = build_pptp_probe().data
    pkt = PPTP(data)
    assert isinstance(pkt, PPTPStartControlConnectionRequest)
    assert pkt.len == 156 == len(data)
    assert pkt.magic_cookie == 0x1A2B3C4D
    assert pkt.protocol_version == 0x0100


@pytest.mark.parametrize("vendor", ["mikrotik", "linux", "draytek"])
def test_pptp_vendor_fixtures(vendor):
    data = fixture_bytes("pptp", f"response_sccrp_{vendor}.hex")
    verdict = parse_pptp_response(data)
    assert verdict.detected and pptp_oracle(data)
    assert verdict.vendor == pptp_vendor_oracle(data)
    assert verdict.vendor.lower() == vendor


def test_pptp_bad_magic():
    data = fixture_bytes("pptp", "negative_bad_magic.hex")
    verdict = parse_pptp_response(data)
    assert not verdict.detected and verdict.evidence == ["bad magic cookie"]


def test_pptp_request_echo_is_not_a_reply():
    verdict = parse_pptp_response(build_pptp_probe().data)
    assert not verdict.detected


def test_pptp_empty_vendor_is_absent():
    verdict = parse_pptp_response(pptp.encode_sccrp(""))
    assert verdict.detected and verdict.vendor is None


@given(st.text(alphabet=st.characters(min_codepoint=33, max_codepoint=126), min_size=1, max_size=64))
def test_pptp_vendor_round_trip(vendor):
    verdict = parse_pptp_response(pptp.encode_sccrp(vendor))
    assert verdict.vendor == vendor.strip()


# -- OpenVPN ------------------------------------------------------------------------

@pytest.mark.parametrize("transport", ["udp", "tcp"])
@pytest.mark.parametrize("km", ["km1", "km2"])
def test_openvpn_fixture_responses(transport, km):
    probe = build_openvpn_probe(transport, km, "none", fixture_rng())
    data = fixture_bytes("openvpn", f"response_{transport}_{km}.hex")
    verdict = parse_openvpn_response(probe, data)
    assert verdict.detected and openvpn_oracle(probe.data, transport == "tcp", data)
    assert verdict.key_method is KeyMethod(km)


def test_openvpn_wrong_ack():
    probe = build_openvpn_probe("udp", "km2", "none", fixture_rng())
    data = fixture_bytes("openvpn", "negative_wrong_ack.hex")
    verdict = parse_openvpn_response(probe, data)
    assert not verdict.detected and not openvpn_oracle(probe.data, False, data)


def test_openvpn_probe_layout():
    probe = build_openvpn_probe("udp", "km2", "none", random.Random(2))
    assert probe.data[0] >> 3 == openvpn.P_CONTROL_HARD_RESET_CLIENT_V2
    assert probe.data[9] == 0  # no acks
    assert struct.unpack("!I", probe.data[10:14]) == (0,)
    assert len(probe.data) == 14
    v1 = build_openvpn_probe("udp", "km1", "none", random.Random(2))
    assert v1.data[0] >> 3 == openvpn.P_CONTROL_HARD_RESET_CLIENT_V1


def test_openvpn_tcp_framing():
    probe = build_openvpn_probe("tcp", "km2", "none", random.Random(2))
    (length,) = struct.unpack("!H", probe.data[:2])
    assert length == len(probe.data) - 2
    assert probe.transport is Transport.TCP


def test_openvpn_hmac_probe_layout():
    probe = build_openvpn_probe("udp", "km2", "random", random.Random(2), net_time=1700000000)
    decoded = openvpn.decode_control(probe.data, openvpn.HMAC_SHA1_LEN)
    assert decoded is not None and len(decoded.hmac) == 20
    assert len(probe.data) == 14 + 28


def test_openvpn_client_reset_echo_is_not_detected():
    probe = build_openvpn_probe("udp", "km2", "none", random.Random(9))
    assert not parse_openvpn_response(probe, probe.data).detected


@given(
    session=st.binary(min_size=8, max_size=8),
    acks=st.lists(st.integers(0, 2**32 - 1), max_size=6),
    packet_id=st.integers(0, 2**32 - 1),
    key_id=st.integers(0, 7),
)
def test_openvpn_control_round_trip(session, acks, packet_id, key_id):
    remote = b"R" * 8 if acks else None
    packet = openvpn.encode_control(8, session, packet_id, tuple(acks), remote, key_id=key_id)
    decoded = openvpn.decode_control(packet)
    assert decoded == openvpn.ControlPacket(8, key_id, session, b"", tuple(acks), remote, packet_id)


# -- SSTP / HTTP ---------------------------------------------------------------------

def test_sstp_request_shape():
    data = build_sstp_request("vpn.example.test", random.Random(1)).data
    head, _, rest = data.partition(b"\r\n")
    assert head == b"SSTP_DUPLEX_POST /sra_{BA195980-CD49-458b-9E23-C84EE0ADCD75}/ HTTP/1.1"
    assert b"Content-Length: 18446744073709551615\r\n" in rest
    assert b"SSTPCORRELATIONID: {" in rest
    assert data.endswith(b"\r\n\r\n")
    with pytest.raises(ValueError):
        build_sstp_request("")


def test_sstp_fixtures():
    ok = fixture_bytes("sstp", "response_200.hex")
    nf = fixture_bytes("sstp", "negative_404.hex")
    v = parse_sstp_response(ok)
    assert v.detected and sstp_oracle(ok) and v.vendor == "Microsoft-HTTPAPI/2.0"
    v = parse_sstp_response(nf)
    assert not v.detected and v.evidence == ["HTTP 404"] and not sstp_oracle(nf)


def test_web_classification():
    assert classify_web_response(b"HTTP/1.0 301 Moved\r\n\r\n")
    assert not classify_web_response(b"SSH-2.0-OpenSSH\r\n")
    assert parse_status(b"HTTP/1.1 200 OK\r\nServer: x\r\nSERVER: y\r\n\r\n") == (200, {"server": "x"})
    assert b"GET / HTTP/1.1\r\n" in build_http_get("h").data


# -- shared types --------------------------------------------------------------------

def test_positive_verdict_needs_evidence():
    with pytest.raises(ValueError):
        DetectionVerdict(True, Protocol.IKE)


def test_vendor_only_for_pptp_and_sstp():
    with pytest.raises(ValueError):
        DetectionVerdict(True, Protocol.IKE, ["x"], vendor="v")


def test_raw_excerpt_truncated():
    v = DetectionVerdict.negative(Protocol.IKE, "x", b"a" * 10_000)
    assert len(v.raw_excerpt) <= 256


def test_transport_target_validation():
    t = TransportTarget("::1", "tcp", 443)
    assert str(t) == "tcp://[::1]:443"
    with pytest.raises(ValueError):
        TransportTarget("10.0.0.1", "udp", 0)
    with pytest.raises(ValueError):
        TransportTarget("10.0.0.300", "udp", 1)


def test_empty_probe_rejected():
    with pytest.raises(ValueError):
        ProbePayload(Protocol.IKE, b"")


def test_parse_response_dispatch():
    probe = build_ike_probe(fixture_rng())
    assert parse_response(probe, fixture_bytes("ike", "response_sa.hex")).detected
    assert response_complete(build_pptp_probe(), b"\x00" * 156)
    assert not response_complete(build_pptp_probe(), b"\x00" * 155)
    assert response_complete(build_sstp_request("h"), b"HTTP/1.1 200 OK\r\n\r\n")


@given(st.binary(max_size=300))
def test_hex_round_trip(data):
    assert loads_hex(dumps_hex(data, "comment\nsecond line")) == data


def test_hex_rejects_garbage():
    with pytest.raises(ValueError, match="line 2"):
        loads_hex("# ok\n0g\n")


# -- no parser ever raises on arbitrary input --------------------------------------

_PROBES = [
    build_ike_probe(random.Random(0)),
    build_pptp_probe(),
    build_openvpn_probe("udp", "km2", "none", random.Random(0)),
    build_openvpn_probe("tcp", "km1", "none", random.Random(0)),
    build_openvpn_probe("udp", "km2", "random", random.Random(0), net_time=1),
    build_sstp_request("h", random.Random(0)),
]


@settings(max_examples=300)
@given(data=st.binary(max_size=65536), which=st.integers(0, len(_PROBES) - 1))
def test_parsers_total_on_arbitrary_bytes(data, which):
    verdict = parse_response(_PROBES[which], data)
    assert isinstance(verdict.detected, bool)
    assert len(verdict.raw_excerpt) <= 256
