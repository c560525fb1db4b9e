"""Regenerate the checked-in fixtures: ``python3 fixtures/generate.py``.

Server responses are assembled with scapy or plain ``struct`` rather than the
package's own encoders, so the parsers are tested against an independent route.
Certificate expectations in ``certs/corpus/manifest.json`` come from how each
certificate was built, never from the classifier.
"""
from __future__ import annotations

import datetime as dt
import json
import random
import struct
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE.parent / "src"))

from scapy.layers.isakmp import (  # noqa: E402
    ISAKMP,
    ISAKMP_payload_Notify,
    ISAKMP_payload_Proposal,
    ISAKMP_payload_SA,
    ISAKMP_payload_Transform,
)
from scapy.layers.pptp import PPTPStartControlConnectionReply  # noqa: E402

from vpnscope.codec import build_ike_probe, build_openvpn_probe, build_pptp_probe, build_sstp_request, dumps_hex  # noqa: E402
from vpnscope.mocknet.certs import CertSpec, issue, make_ca, new_key  # noqa: E402

UTC = dt.timezone.utc
REFERENCE_DATE = dt.datetime(2024, 6, 1, tzinfo=UTC)
SEED = 7


def write_hex(path: Path, data: bytes, comment: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_hex(data, comment))


def ike_fixtures(out: Path):
    probe = build_ike_probe(random.Random(SEED))
    cookie = probe.data[:8]
    write_hex(out / "probe_main_mode.hex", probe.data, "IKEv1 Main Mode probe, seven transforms")
    transform = ISAKMP_payload_Transform(
        transform_count=1, transform_id=1,
        transforms=[("Encryption", "AES-CBC"), ("KeyLength", 128), ("Hash", "SHA"),
                    ("Authentication", "PSK"), ("GroupDesc", "1024MODPgr"),
                    ("LifeType", "Seconds"), ("LifeDuration", 28800)],
    )
    sa = ISAKMP_payload_SA(prop=ISAKMP_payload_Proposal(trans_nb=1, trans=transform))
    responder = bytes.fromhex("5a17c0ffee0000a1")
    reply = ISAKMP(init_cookie=cookie, resp_cookie=responder, next_payload=1, exch_type=2) / sa
    write_hex(out / "response_sa.hex", bytes(reply), "responder picks AES128/SHA1/DH2, built with scapy")
    notify = ISAKMP(init_cookie=cookie, resp_cookie=responder, next_payload=11, exch_type=5) / ISAKMP_payload_Notify(
        doi=1, proto=1, notify_msg_type=14
    )
    write_hex(out / "response_notify.hex", bytes(notify), "NO-PROPOSAL-CHOSEN notification, built with scapy")
    wrong = ISAKMP(init_cookie=bytes(8), resp_cookie=responder, next_payload=1, exch_type=2) / sa
    write_hex(out / "negative_cookie_mismatch.hex", bytes(wrong), "valid layout but the initiator cookie is not echoed")


def pptp_fixtures(out: Path):
    write_hex(out / "probe_sccrq.hex", build_pptp_probe().data, "Start-Control-Connection-Request")
    for vendor in ("MikroTik", "Linux", "DrayTek"):
        reply = PPTPStartControlConnectionReply(
            result_code=1, maximum_channels=1, firmware_revision=1,
            host_name=b"gw", vendor_string=vendor.encode(),
        )
        write_hex(out / f"response_sccrp_{vendor.lower()}.hex", bytes(reply), f"SCCRP from a {vendor} server, built with scapy")
    bad = bytearray(bytes(PPTPStartControlConnectionReply(vendor_string=b"x")))
    bad[4:8] = b"\xde\xad\xbe\xef"
    write_hex(out / "negative_bad_magic.hex", bytes(bad), "SCCRP with a corrupted magic cookie")


def _openvpn_server_reset(opcode: int, ack_session: bytes, session: bytes, tcp: bool) -> bytes:
    # opcode/key-id, own session, one ACK for packet 0 of the client's session, packet id 0
    packet = struct.pack("!B8sBI8sI", opcode << 3, session, 1, 0, ack_session, 0)
    return struct.pack("!H", len(packet)) + packet if tcp else packet


def openvpn_fixtures(out: Path):
    session = bytes.fromhex("0123456789abcdef")
    for transport in ("udp", "tcp"):
        for km in ("km1", "km2"):
            probe = build_openvpn_probe(transport, km, "none", random.Random(SEED))
            write_hex(out / f"probe_{transport}_{km}.hex", probe.data, f"client hard reset, {transport}, {km}")
            sid = probe.data[2:][1:9] if transport == "tcp" else probe.data[1:9]
            opcode = 2 if km == "km1" else 8
            write_hex(
                out / f"response_{transport}_{km}.hex",
                _openvpn_server_reset(opcode, sid, session, transport == "tcp"),
                f"server hard reset v{1 if km == 'km1' else 2} acknowledging the probe session, packed with struct",
            )
    write_hex(
        out / "negative_wrong_ack.hex",
        _openvpn_server_reset(8, bytes(8), session, False),
        "server hard reset acknowledging some other session",
    )


def sstp_fixtures(out: Path):
    write_hex(out / "probe_duplex_post.hex", build_sstp_request("vpn.example.test", random.Random(SEED)).data, "SSTP_DUPLEX_POST")
    ok = (
        b"HTTP/1.1 200 OK\r\nContent-Length: 18446744073709551615\r\n"
        b"Server: Microsoft-HTTPAPI/2.0\r\nDate: Thu, 01 Jan 2024 00:00:00 GMT\r\n\r\n"
    )
    write_hex(out / "response_200.hex", ok, "duplex post accepted by an SSTP server")
    nf = b"HTTP/1.1 404 Not Found\r\nServer: nginx\r\nContent-Length: 0\r\n\r\n"
    write_hex(out / "negative_404.hex", nf, "plain web server rejecting the SSTP path")


# -- certificates ------------------------------------------------------------------

def _flags(expired, self_issued, self_signed, snake_oil):
    return {"expired": expired, "self_issued": self_issued, "self_signed": self_signed, "snake_oil": snake_oil}


def _corpus_kinds(ca):
    """name -> (builder(not_before, not_after), expected flags without expiry)."""

    def spec(**kw):
        return lambda nb, na: issue(CertSpec(not_before=nb, not_after=na, **kw))

    def ca_signed(cn="vpn.corp.test", org="Corp"):
        return lambda nb, na: issue(CertSpec(subject_cn=cn, subject_org=org, not_before=nb, not_after=na), issuer=ca)

    return {
        "ca_signed": (ca_signed(), (False, False, False)),
        "ca_signed_localhost": (ca_signed("localhost", None), (False, False, False)),
        "self_signed": (spec(subject_cn="vpn.self.test", subject_org="Self"), (True, True, False)),
        "self_issued_foreign_key": (spec(subject_cn="gw.test", self_key_signs=False), (True, False, False)),
        "own_key_other_issuer": (spec(subject_cn="gw.test", issuer_cn="Other CA", self_key_signs=True), (False, True, False)),
        "snake_localhost": (spec(subject_cn="localhost"), (True, True, True)),
        "snake_user_local": (spec(subject_cn="user.local"), (True, True, True)),
        "snake_foreign_key": (spec(subject_cn="localhost", self_key_signs=False), (True, False, True)),
        "cross_placeholder_names": (spec(subject_cn="localhost", issuer_cn="user.local", self_key_signs=True), (False, True, False)),
        "localhost_mixed_case": (spec(subject_cn="LocalHost"), (True, True, False)),
    }


def cert_corpus(out: Path):
    out.mkdir(parents=True, exist_ok=True)
    for old in out.glob("*.pem"):
        old.unlink()
    ca = make_ca("Corpus Root CA", "Corpus Trust")
    kinds = _corpus_kinds(ca)
    windows = [
        ("valid", REFERENCE_DATE - dt.timedelta(days=200), REFERENCE_DATE + dt.timedelta(days=165), False),
        ("expired", REFERENCE_DATE - dt.timedelta(days=800), REFERENCE_DATE - dt.timedelta(days=30), True),
        ("expired_yesterday", REFERENCE_DATE - dt.timedelta(days=366), REFERENCE_DATE - dt.timedelta(days=1), True),
        ("expires_at_reference", REFERENCE_DATE - dt.timedelta(days=90), REFERENCE_DATE, False),
        ("long_valid", REFERENCE_DATE - dt.timedelta(days=3000), REFERENCE_DATE + dt.timedelta(days=3650), False),
    ]
    manifest = {"reference_date": REFERENCE_DATE.date().isoformat(), "certificates": {}}
    n = 0
    for kind, (build, (self_issued, self_signed, snake)) in kinds.items():
        for label, nb, na, expired in windows:
            n += 1
            name = f"{n:02d}_{kind}_{label}.pem"
            (out / name).write_bytes(build(nb, na).pem)
            manifest["certificates"][name] = _flags(expired, self_issued, self_signed, snake)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return n


def sni_certs(out: Path):
    """Default certificate plus vhost variants: different, renewed, identical."""
    out.mkdir(parents=True, exist_ok=True)
    ca = make_ca("SNI Test CA", "SNI Test Trust")
    key = new_key()
    base = CertSpec(subject_cn="vpn.example.test", san=["vpn.example.test"], serial=1001)
    default = issue(base, key=key, issuer=ca)
    default.write(out, "default")
    other = issue(CertSpec(subject_cn="portal.other.test", san=["portal.other.test"], serial=1002), issuer=ca)
    other.write(out, "other")
    renewed_spec = CertSpec(
        subject_cn="vpn.example.test", san=["vpn.example.test"], serial=1003,
        not_before=dt.datetime(2023, 1, 1, tzinfo=UTC), not_after=dt.datetime(2033, 1, 1, tzinfo=UTC),
    )
    issue(renewed_spec, key=key, issuer=ca).write(out, "renewed")


def sample_certs(out: Path):
    """A handful of standalone PEMs used by unit tests."""
    ca = make_ca("Sample CA", "Sample Org")
    issue(CertSpec(subject_cn="localhost")).write(out, "snakeoil_localhost")
    issue(CertSpec(subject_cn="vpn.sample.test", subject_org="Sample VPN", san=["vpn.sample.test", "10.0.0.1"]), issuer=ca).write(
        out, "ca_signed"
    )
    ca.write(out, "sample_ca")


PSL = """\
// Small public suffix list for tests: plain, wildcard and exception rules.
com
net
org
io
de
test
example
uk
co.uk
ac.uk
gov.uk
jp
co.jp
*.kawasaki.jp
!city.kawasaki.jp
github.io
*.compute.amazonaws.com
au
com.au
"""


def main():
    ike_fixtures(HERE / "ike")
    pptp_fixtures(HERE / "pptp")
    openvpn_fixtures(HERE / "openvpn")
    sstp_fixtures(HERE / "sstp")
    n = cert_corpus(HERE / "certs" / "corpus")
    sni_certs(HERE / "certs" / "sni")
    sample_certs(HERE / "certs")
    (HERE / "psl").mkdir(exist_ok=True)
    (HERE / "psl" / "public_suffix_test.dat").write_text(PSL)
    print(f"wrote fixtures ({n} corpus certificates)")


if __name__ == "__main__":
    main()
