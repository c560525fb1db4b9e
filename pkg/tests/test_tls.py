import datetime as dt
import json
import random
import socket

import numpy as np
import pytest
from cryptography import x509
from cryptography.hazmat.primitives.serialization import Encoding
from hypothesis import given
from hypothesis import strategies as st

from vpnscope.codec import TransportTarget
from vpnscope.mocknet import MockProfile, TlsConfig, heartbleed_tls, legacy_tls, modern_tls, spawn
from vpnscope.mocknet.certs import CertSpec, issue, make_ca
from vpnscope.tls import wire
from vpnscope.tls.audit import (
    CertFlags,
    TlsCertificateRecord,
    TlsHandshakeError,
    audit_row,
    audit_targets,
    classify_certificate,
    cn_substring_count,
    collect_certificate,
    compare_sni_certificates,
    dedupe_certificates,
    ecdf,
    expiry_distribution,
    flag_table,
    issuer_stats,
    record_from_der,
    sni_comparison_table,
)
from vpnscope.tls.ciphers import CIPHER_CLASSES, CipherClass, TlsVersion, suite_name, suites_for
from vpnscope.tls.vuln import BUILTIN_CHECKS, VulnFinding, VulnId, run_all_checks, run_check, summary_matrix

UTC = dt.timezone.utc
REF = dt.date(2024, 6, 1)


def record_of(issued, **kw) -> TlsCertificateRecord:
    return record_from_der(issued.der, **kw)


def load_record(path) -> TlsCertificateRecord:
    cert = x509.load_pem_x509_certificate(path.read_bytes())
    return record_from_der(cert.public_bytes(Encoding.DER))


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


# -- classification ------------------------------------------------------------

def test_corpus_manifest(fixtures_dir):
    manifest = json.loads((fixtures_dir / "certs" / "corpus" / "manifest.json").read_text())
    ref = dt.date.fromisoformat(manifest["reference_date"])
    for name, expected in manifest["certificates"].items():
        flags = classify_certificate(load_record(fixtures_dir / "certs" / "corpus" / name), ref)
        assert flags.__dict__ == expected, name


def test_expired_day_before_reference():
    rec = record_of(issue(CertSpec(
        not_before=dt.datetime(2023, 1, 1, tzinfo=UTC), not_after=dt.datetime(2024, 5, 31, tzinfo=UTC)
    )))
    flags = classify_certificate(rec, REF)
    assert flags.expired and flags.self_issued


def test_not_expired_day_after_reference():
    rec = record_of(issue(CertSpec(not_after=dt.datetime(2024, 6, 2, tzinfo=UTC))))
    assert not classify_certificate(rec, REF).expired
    assert expiry_distribution([rec], REF) == []


def test_snake_oil_fixture(fixtures_dir):
    flags = classify_certificate(load_record(fixtures_dir / "certs" / "snakeoil_localhost.pem"), REF)
    assert flags == CertFlags(False, True, True, True)


def test_ca_signed_fixture(fixtures_dir):
    rec = load_record(fixtures_dir / "certs" / "ca_signed.pem")
    assert classify_certificate(rec, REF) == CertFlags(False, False, False, False)
    assert rec.issuer_org == "Sample Org" and set(rec.san_list) == {"vpn.sample.test", "10.0.0.1"}


def test_rsa_self_signed_detected():
    from vpnscope.mocknet.certs import new_key

    rec = record_of(issue(CertSpec(subject_cn="rsa.test"), key=new_key("rsa")))
    assert rec.self_signature_valid


def test_snake_oil_implies_self_issued():
    with pytest.raises(ValueError):
        CertFlags(False, False, False, True)


def test_record_validity_order():
    with pytest.raises(ValueError):
        TlsCertificateRecord("a", "a", dt.datetime(2025, 1, 1, tzinfo=UTC), dt.datetime(2024, 1, 1, tzinfo=UTC), False)


# -- statistics ------------------------------------------------------------------

def _rec(cn, issuer_org=None, not_after=dt.datetime(2025, 1, 1, tzinfo=UTC), fp=None):
    return TlsCertificateRecord(
        cn, cn, dt.datetime(2020, 1, 1, tzinfo=UTC), not_after, False, fingerprint=fp, issuer_org=issuer_org
    )


def test_dedupe_keeps_fingerprintless_apart():
    recs = [_rec("a", fp="1"), _rec("a", fp="1"), _rec("b", fp="2"), _rec("c")]
    out = dedupe_certificates(recs)
    assert [r.fingerprint for r in out.unique] == ["1", "2"]
    assert len(out.fingerprintless) == 1 and len(out.analyzed) == 3


def test_issuer_stats_orders_by_count():
    recs = [_rec("a", "B Org"), _rec("b", "A Org"), _rec("c", "B Org"), _rec("d")]
    assert issuer_stats(recs) == [("B Org", 2), ("A Org", 1), ("N/S", 1)]


def test_expiry_distribution_and_ecdf():
    ref = dt.date(2024, 6, 1)
    recs = [_rec("a", not_after=dt.datetime(2024, 5, 1, tzinfo=UTC)), _rec("b", not_after=dt.datetime(2024, 5, 31, tzinfo=UTC)),
            _rec("c", not_after=dt.datetime(2025, 1, 1, tzinfo=UTC))]
    days = expiry_distribution(recs, ref)
    assert sorted(days) == [1, 31]
    xs, ys = ecdf(days)
    assert list(xs) == [1.0, 31.0] and list(ys) == [0.5, 1.0]


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50))
def test_ecdf_monotone(values):
    xs, ys = ecdf(values)
    assert np.all(np.diff(xs) >= 0) and np.all(np.diff(ys) > 0) and ys[-1] == 1.0


def test_cn_substring_and_flag_table():
    recs = [_rec("fritz.box"), _rec("FRITZ!Box"), _rec("other")]
    assert cn_substring_count(recs, "fritz") == 2
    table = flag_table(recs, REF)
    assert table["certificates"] == 3 == table["expired"] + table["valid"]


# -- SNI comparison ----------------------------------------------------------------

def test_compare_identical_renewed_and_different():
    ca = make_ca()
    from vpnscope.mocknet.certs import new_key

    key = new_key()
    base = record_of(issue(CertSpec(subject_cn="vpn.a.test", san=["vpn.a.test"]), key=key, issuer=ca))
    same = compare_sni_certificates(base, base)
    assert not same.mismatch and not same.renewal
    renewed = record_of(issue(CertSpec(subject_cn="vpn.a.test", san=["vpn.a.test"],
                                       not_after=dt.datetime(2035, 1, 1, tzinfo=UTC)), key=key, issuer=ca))
    report = compare_sni_certificates(renewed, base)
    assert not report.mismatch and report.renewal and report.newer == "with_sni"
    other = record_of(issue(CertSpec(subject_cn="vpn.b.test", san=["vpn.b.test"]), issuer=ca))
    report = compare_sni_certificates(other, base)
    assert report.mismatch and set(report.fields) == {"subject_key_id", "san_list", "subject_cn"}
    table = sni_comparison_table([same, compare_sni_certificates(renewed, base), report])
    assert table["pairs"] == 3 and table["renewals"] == 1 and table["certificate_mismatches"] == 1


def test_san_order_does_not_matter():
    a = _rec("x")
    b = TlsCertificateRecord(**{**a.__dict__, "san_list": ("b", "a")})
    c = TlsCertificateRecord(**{**a.__dict__, "san_list": ("a", "b")})
    assert not compare_sni_certificates(b, c).mismatch


@pytest.fixture(scope="module")
def sni_server(fixtures_dir):
    sni = fixtures_dir / "certs" / "sni"
    pair = lambda stem: (str(sni / f"{stem}.pem"), str(sni / f"{stem}.key"))  # noqa: E731
    cfg = TlsConfig(
        cert_file=pair("default")[0], key_file=pair("default")[1],
        sni_certs={"other.test": pair("other"), "renewed.test": pair("renewed"), "same.test": pair("default")},
    )
    with spawn(MockProfile("web", tls_config=cfg, address="127.0.0.1")) as ep:
        yield TransportTarget(ep.address, "tcp", ep.port)


def test_sni_vhosts_against_mock(sni_server):
    base = collect_certificate(sni_server, None, timeout=3)
    assert base.subject_cn == "vpn.example.test"
    other = compare_sni_certificates(collect_certificate(sni_server, "other.test", 3), base)
    renewed = compare_sni_certificates(collect_certificate(sni_server, "renewed.test", 3), base)
    same = compare_sni_certificates(collect_certificate(sni_server, "same.test", 3), base)
    assert other.mismatch
    assert not renewed.mismatch and renewed.renewal
    assert not same.mismatch and not same.renewal


def test_audit_targets_rows(sni_server):
    run = audit_targets([(sni_server, "sstp")], REF, {sni_server.address: ["other.test", "renewed.test"]}, timeout=3)
    assert len(run.rows) == 3 and not run.failures
    first = run.rows[0]
    assert list(first)[:3] == ["target_ip", "port", "protocol"]
    assert first["not_after"].endswith("Z")
    by_sni = {c["sni"]: c for c in run.comparisons}
    assert by_sni["other.test"]["mismatch"] and by_sni["renewed.test"]["renewal"]


def test_collect_refused_reports_connect_stage():
    target = TransportTarget("127.0.0.1", "tcp", free_port())
    with pytest.raises(TlsHandshakeError) as err:
        collect_certificate(target, None, timeout=1)
    assert err.value.stage == "connect"
    run = audit_targets([(target, "sstp")], REF, timeout=1)
    assert run.failures[0]["stage"] == "connect" and not run.rows


def test_audit_row_field_order():
    row = audit_row(_rec("localhost", fp="ab"), classify_certificate(_rec("localhost"), REF))
    assert list(row)[-4:] == ["expired", "self_issued", "self_signed", "snake_oil"]


# -- wire format ---------------------------------------------------------------------

@given(
    version=st.sampled_from([TlsVersion.SSL3, TlsVersion.TLS10, TlsVersion.TLS11, TlsVersion.TLS12]),
    ciphers=st.lists(st.integers(1, 0xFFFE), min_size=1, max_size=40, unique=True),
    sni=st.one_of(st.none(), st.from_regex(r"[a-z]{1,10}\.test", fullmatch=True)),
    heartbeat=st.booleans(),
)
def test_client_hello_round_trip(version, ciphers, sni, heartbeat):
    data = wire.build_client_hello(version, ciphers, sni=sni, heartbeat=heartbeat)
    assert data[0] == wire.CT_HANDSHAKE
    messages = wire.HandshakeBuffer().feed(data[5:])
    hello = wire.parse_client_hello(messages[0][1])
    assert hello.version == version and list(hello.ciphers) == ciphers
    assert hello.sni == sni
    assert (wire.EXT_HEARTBEAT in hello.extensions) is heartbeat


def test_server_hello_round_trip():
    body = wire.build_server_hello(TlsVersion.TLS12, 0x002F, [(wire.EXT_HEARTBEAT, b"\x01")], random.Random(1))
    messages = wire.HandshakeBuffer().feed(body)
    hello = wire.parse_server_hello(messages[0][1])
    assert hello.cipher == 0x002F and wire.EXT_HEARTBEAT in hello.extensions


def test_cipher_classes_are_consistent():
    assert 0x0005 in suites_for(CipherClass.RC4)
    assert suites_for(CipherClass.RC4) <= suites_for(CipherClass.ALL)
    assert suites_for(CipherClass.TLS_RSA).isdisjoint(suites_for(CipherClass.TLS_DH))
    assert suites_for(CipherClass.ALL) >= set(CIPHER_CLASSES[CipherClass.RSA_EXPORT])
    assert suite_name(0x002F) == "TLS_RSA_WITH_AES_128_CBC_SHA"


# -- vulnerability checks ---------------------------------------------------------

def _findings(tls_config):
    with spawn(MockProfile("web", tls_config=tls_config, address="127.0.0.1")) as ep:
        target = TransportTarget(ep.address, "tcp", ep.port)
        run = run_all_checks([target], timeout=3, workers=1)
    return {f.vuln_id.value: f for f in run.findings}, run


def test_modern_profile_has_no_findings():
    findings, _ = _findings(modern_tls())
    assert len(findings) == len(VulnId)
    assert {k for k, f in findings.items() if f.vulnerable} == set()


def test_legacy_profile_findings():
    findings, run = _findings(legacy_tls())
    assert {k for k, f in findings.items() if f.vulnerable} == {"poodle", "rc4", "robot"}
    assert findings["poodle"].detail.startswith("SSLv3")
    assert run.matrix["rc4"] == {"all": 1}


def test_heartbleed_profile_findings():
    findings, _ = _findings(heartbleed_tls())
    assert {k for k, f in findings.items() if f.vulnerable} == {"heartbleed"}
    assert findings["heartbleed"].detail.startswith("overread")


def test_strict_heartbeat_is_not_vulnerable():
    cfg = TlsConfig(engine="synthetic", versions=("TLS12",), heartbeat="strict")
    with spawn(MockProfile("web", tls_config=cfg, address="127.0.0.1")) as ep:
        f = run_check(TransportTarget(ep.address, "tcp", ep.port), BUILTIN_CHECKS[VulnId.HEARTBLEED], 3)
    assert not f.vulnerable and f.error is None


def test_sslv2_server_is_drown_positive():
    cfg = TlsConfig(engine="synthetic", versions=("SSL2", "TLS12"), cipher_classes=("modern",))
    with spawn(MockProfile("web", tls_config=cfg, address="127.0.0.1")) as ep:
        f = run_check(TransportTarget(ep.address, "tcp", ep.port), BUILTIN_CHECKS[VulnId.DROWN], 3)
    assert f.vulnerable and f.detail.startswith("SSLv2")


def test_unreachable_target_gives_error_not_vulnerable():
    f = run_check(TransportTarget("127.0.0.1", "tcp", free_port()), BUILTIN_CHECKS[VulnId.RC4], 1)
    assert not f.vulnerable and f.error


def test_finding_json_and_matrix():
    t = TransportTarget("10.0.0.1", "tcp", 443)
    now = dt.datetime(2024, 1, 1, tzinfo=UTC)
    f = VulnFinding(t, VulnId.ROBOT, True, "TLS1.2 x", now)
    assert f.to_json() == {"target_ip": "10.0.0.1", "port": 443, "vuln": "robot", "vulnerable": True,
                           "detail": "TLS1.2 x", "timestamp": "2024-01-01T00:00:00Z"}
    m = summary_matrix([f, VulnFinding(t, VulnId.RC4, False, "", now)], {t: "sstp"})
    assert m["robot"] == {"sstp": 1} and m["rc4"] == {"sstp": 0}
    with pytest.raises(ValueError):
        VulnFinding(t, VulnId.RC4, True, "", now)
