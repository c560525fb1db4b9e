"""Leaf-certificate collection and hygiene statistics for TLS-based VPN endpoints."""
from __future__ import annotations

import datetime as dt
import hashlib
import socket
import ssl
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from cryptography import x509
from cryptography.exceptions import InvalidSignature, UnsupportedAlgorithm
from cryptography.hazmat.primitives.asymmetric import dsa, ec, ed448, ed25519, padding, rsa
from cryptography.x509.oid import ExtensionOID, NameOID

from ..codec.base import TransportTarget
from . import wire
from .ciphers import CIPHER_CLASSES, CipherClass, TlsVersion

UTC = dt.timezone.utc
SNAKE_OIL_NAMES = frozenset({"localhost", "user.local"})
NOT_SPECIFIED = "N/S"
SNI_FIELDS = ("authority_key_id", "subject_key_id", "san_list", "issuer_cn", "subject_cn")


class TlsHandshakeError(Exception):
    """A certificate could not be collected; ``stage`` says how far the handshake got."""

    def __init__(self, stage: str, detail: str):
        super().__init__(f"{stage}: {detail}")
        self.stage = stage
        self.detail = detail


@dataclass(frozen=True)
class TlsCertificateRecord:
    subject_cn: Optional[str]
    issuer_cn: Optional[str]
    not_before: dt.datetime
    not_after: dt.datetime
    self_signature_valid: bool
    source_target: Optional[TransportTarget] = None
    sni_used: Optional[str] = None
    fingerprint: Optional[str] = None
    subject_org: Optional[str] = None
    issuer_org: Optional[str] = None
    san_list: tuple[str, ...] = ()
    authority_key_id: Optional[bytes] = None
    subject_key_id: Optional[bytes] = None
    subject_dn: bytes = b""
    issuer_dn: bytes = b""

    def __post_init__(self):
        if self.not_before > self.not_after:
            raise ValueError("not_before is after not_after")


@dataclass(frozen=True)
class CertFlags:
    expired: bool
    self_issued: bool
    self_signed: bool
    snake_oil: bool

    def __post_init__(self):
        if self.snake_oil and not self.self_issued:
            raise ValueError("snake-oil certificates are self-issued by definition")


def _attr(name: x509.Name, oid) -> Optional[str]:
    values = name.get_attributes_for_oid(oid)
    return str(values[0].value) if values else None


def _extension(cert: x509.Certificate, oid):
    try:
        return cert.extensions.get_extension_for_oid(oid).value
    except x509.ExtensionNotFound:
        return None


def _verifies_under_own_key(cert: x509.Certificate) -> bool:
    # Signature check only. The issuer name is ignored on purpose: a certificate whose
    # issuer DN differs from its subject can still be signed by its own key.
    try:
        key = cert.public_key()
        sig, tbs, digest = cert.signature, cert.tbs_certificate_bytes, cert.signature_hash_algorithm
        if isinstance(key, rsa.RSAPublicKey):
            pad = cert.signature_algorithm_parameters
            key.verify(sig, tbs, pad if pad is not None else padding.PKCS1v15(), digest)
        elif isinstance(key, ec.EllipticCurvePublicKey):
            key.verify(sig, tbs, ec.ECDSA(digest))
        elif isinstance(key, dsa.DSAPublicKey):
            key.verify(sig, tbs, digest)
        elif isinstance(key, (ed25519.Ed25519PublicKey, ed448.Ed448PublicKey)):
            key.verify(sig, tbs)
        else:
            return False
    except (InvalidSignature, UnsupportedAlgorithm, ValueError, TypeError):
        return False
    return True


def fingerprint_der(der: bytes) -> str:
    return hashlib.sha256(der).hexdigest()


def record_from_der(
    der: bytes,
    target: Optional[TransportTarget] = None,
    sni: Optional[str] = None,
    with_fingerprint: bool = True,
) -> TlsCertificateRecord:
    cert = x509.load_der_x509_certificate(der)
    san = _extension(cert, ExtensionOID.SUBJECT_ALTERNATIVE_NAME)
    aki = _extension(cert, ExtensionOID.AUTHORITY_KEY_IDENTIFIER)
    ski = _extension(cert, ExtensionOID.SUBJECT_KEY_IDENTIFIER)
    names: list[str] = []
    if san is not None:
        names += san.get_values_for_type(x509.DNSName)
        names += [str(ip) for ip in san.get_values_for_type(x509.IPAddress)]
    return TlsCertificateRecord(
        subject_cn=_attr(cert.subject, NameOID.COMMON_NAME),
        issuer_cn=_attr(cert.issuer, NameOID.COMMON_NAME),
        not_before=cert.not_valid_before_utc,
        not_after=cert.not_valid_after_utc,
        self_signature_valid=_verifies_under_own_key(cert),
        source_target=target,
        sni_used=sni,
        fingerprint=fingerprint_der(der) if with_fingerprint else None,
        subject_org=_attr(cert.subject, NameOID.ORGANIZATION_NAME),
        issuer_org=_attr(cert.issuer, NameOID.ORGANIZATION_NAME),
        san_list=tuple(names),
        authority_key_id=aki.key_identifier if aki is not None else None,
        subject_key_id=ski.digest if ski is not None else None,
        subject_dn=cert.subject.public_bytes(),
        issuer_dn=cert.issuer.public_bytes(),
    )


# -- collection -------------------------------------------------------------

_PERMISSIVE_CIPHERS = sorted(CIPHER_CLASSES[CipherClass.ALL])


def _raw_leaf(target: TransportTarget, sni: Optional[str], timeout: float) -> bytes:
    try:
        sock = socket.create_connection((str(target.address), target.port), timeout=timeout)
    except OSError as exc:
        raise TlsHandshakeError("connect", str(exc)) from exc
    with sock:
        try:
            sock.sendall(wire.build_client_hello(TlsVersion.TLS12, _PERMISSIVE_CIPHERS, sni=sni))
            flight = wire.read_server_flight(sock)
        except (OSError, wire.WireError) as exc:
            raise TlsHandshakeError("server-hello", str(exc) or type(exc).__name__) from exc
    if flight.server_hello is None:
        reason = f"alert {flight.alert_name}" if flight.alert else "connection closed"
        raise TlsHandshakeError("server-hello", reason)
    if not flight.certificates:
        raise TlsHandshakeError("certificate", "no certificate in server flight")
    return flight.certificates[0]


def _stdlib_leaf(target: TransportTarget, sni: Optional[str], timeout: float) -> bytes:
    ctx = ssl.SSLContext(ssl.PROTOCOL_TLS_CLIENT)
    ctx.check_hostname = False
    ctx.verify_mode = ssl.CERT_NONE
    try:
        with socket.create_connection((str(target.address), target.port), timeout=timeout) as sock:
            with ctx.wrap_socket(sock, server_hostname=sni) as tls:
                der = tls.getpeercert(binary_form=True)
    except ssl.SSLError as exc:
        raise TlsHandshakeError("handshake", exc.reason or str(exc)) from exc
    except OSError as exc:
        raise TlsHandshakeError("handshake", str(exc)) from exc
    if not der:
        raise TlsHandshakeError("certificate", "no peer certificate")
    return der


def collect_certificate(
    target: TransportTarget, sni: Optional[str] = None, timeout: float = 5.0
) -> TlsCertificateRecord:
    """Handshake with ``target`` and record its end-entity certificate.

    A hand-assembled hello offering SSLv3 through TLS 1.2 and every catalogued suite
    goes first, so legacy servers still hand over a certificate. Servers that refuse
    it get a second attempt through the platform TLS stack (covers TLS 1.3-only peers).
    """
    try:
        der = _raw_leaf(target, sni, timeout)
    except TlsHandshakeError as first:
        if first.stage == "connect":
            raise
        try:
            der = _stdlib_leaf(target, sni, timeout)
        except TlsHandshakeError:
            raise first from None
    return record_from_der(der, target, sni)


# -- classification & statistics --------------------------------------------

def as_utc(moment: Union[dt.date, dt.datetime]) -> dt.datetime:
    if isinstance(moment, dt.datetime):
        return moment if moment.tzinfo else moment.replace(tzinfo=UTC)
    return dt.datetime(moment.year, moment.month, moment.day, tzinfo=UTC)


def classify_certificate(record: TlsCertificateRecord, reference_date: Union[dt.date, dt.datetime]) -> CertFlags:
    # DN comparison is over the exact DER octets, so it is case-sensitive.
    self_issued = record.subject_dn == record.issuer_dn
    snake_oil = self_issued and record.subject_cn in SNAKE_OIL_NAMES and record.issuer_cn in SNAKE_OIL_NAMES
    return CertFlags(
        expired=record.not_after < as_utc(reference_date),
        self_issued=self_issued,
        self_signed=record.self_signature_valid,
        snake_oil=snake_oil,
    )


@dataclass
class DedupeResult:
    unique: list[TlsCertificateRecord] = field(default_factory=list)
    fingerprintless: list[TlsCertificateRecord] = field(default_factory=list)

    @property
    def analyzed(self) -> list[TlsCertificateRecord]:
        return self.unique + self.fingerprintless


def dedupe_certificates(records: Iterable[TlsCertificateRecord]) -> DedupeResult:
    out = DedupeResult()
    seen: set[str] = set()
    for rec in records:
        if rec.fingerprint is None:
            out.fingerprintless.append(rec)
        elif rec.fingerprint not in seen:
            seen.add(rec.fingerprint)
            out.unique.append(rec)
    return out


def issuer_stats(records: Iterable[TlsCertificateRecord]) -> list[tuple[str, int]]:
    counts = Counter((rec.issuer_org or NOT_SPECIFIED) for rec in records)
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))


def expiry_distribution(
    records: Iterable[TlsCertificateRecord], reference_date: Union[dt.date, dt.datetime]
) -> list[int]:
    ref = as_utc(reference_date)
    return [(ref - rec.not_after).days for rec in records if rec.not_after < ref]


def ecdf(values: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Sorted sample and cumulative fraction at each point."""
    xs = np.sort(np.asarray(values, dtype=float))
    return xs, np.arange(1, len(xs) + 1) / max(len(xs), 1)


def cn_substring_count(records: Iterable[TlsCertificateRecord], substring: str) -> int:
    needle = substring.lower()
    return sum(
        1 for rec in records if any(needle in (cn or "").lower() for cn in (rec.subject_cn, rec.issuer_cn))
    )


@dataclass(frozen=True)
class MismatchReport:
    mismatch: bool
    renewal: bool = False
    fields: tuple[str, ...] = ()
    newer: Optional[str] = None  # "with_sni" / "without_sni" for renewals with distinct expiry


def _field_value(rec: TlsCertificateRecord, name: str):
    value = getattr(rec, name)
    return tuple(sorted(value)) if name == "san_list" else value


def compare_sni_certificates(with_sni: TlsCertificateRecord, without_sni: TlsCertificateRecord) -> MismatchReport:
    if with_sni.fingerprint is not None and with_sni.fingerprint == without_sni.fingerprint:
        return MismatchReport(mismatch=False)
    differing = tuple(f for f in SNI_FIELDS if _field_value(with_sni, f) != _field_value(without_sni, f))
    if differing:
        return MismatchReport(mismatch=True, fields=differing)
    newer = None
    if with_sni.not_after > without_sni.not_after:
        newer = "with_sni"
    elif without_sni.not_after > with_sni.not_after:
        newer = "without_sni"
    return MismatchReport(mismatch=False, renewal=True, newer=newer)


def sni_comparison_table(pairs: Iterable[MismatchReport]) -> dict[str, int]:
    """Counts shaped like the with/without-SNI comparison table."""
    table = {"pairs": 0, "certificate_mismatches": 0, "renewals": 0}
    table.update({f"{name}_mismatches": 0 for name in SNI_FIELDS})
    for report in pairs:
        table["pairs"] += 1
        table["renewals"] += report.renewal
        if report.mismatch:
            table["certificate_mismatches"] += 1
            for name in report.fields:
                table[f"{name}_mismatches"] += 1
    return table


def flag_table(records: Iterable[TlsCertificateRecord], reference_date) -> dict[str, int]:
    table = Counter(certificates=0, expired=0, valid=0, self_issued=0, self_signed=0, snake_oil=0)
    for rec in records:
        flags = classify_certificate(rec, reference_date)
        table["certificates"] += 1
        table["expired" if flags.expired else "valid"] += 1
        table["self_issued"] += flags.self_issued
        table["self_signed"] += flags.self_signed
        table["snake_oil"] += flags.snake_oil
    return dict(table)


# -- batch audit --------------------------------------------------------------

def _iso(moment: dt.datetime) -> str:
    return moment.astimezone(UTC).isoformat().replace("+00:00", "Z")


def audit_row(record: TlsCertificateRecord, flags: CertFlags, protocol: Optional[str] = None) -> dict:
    """NDJSON form of one collected certificate and its hygiene flags."""
    row: dict = {}
    if record.source_target is not None:
        row["target_ip"] = str(record.source_target.address)
        row["port"] = record.source_target.port
    if protocol:
        row["protocol"] = protocol
    optional = {
        "sni": record.sni_used,
        "fingerprint": record.fingerprint,
        "subject_cn": record.subject_cn,
        "issuer_cn": record.issuer_cn,
        "issuer_org": record.issuer_org,
    }
    row.update({k: v for k, v in optional.items() if v is not None})
    row["not_before"] = _iso(record.not_before)
    row["not_after"] = _iso(record.not_after)
    row.update(
        expired=flags.expired, self_issued=flags.self_issued, self_signed=flags.self_signed, snake_oil=flags.snake_oil
    )
    return row


@dataclass
class AuditRun:
    rows: list[dict] = field(default_factory=list)
    records: list[TlsCertificateRecord] = field(default_factory=list)
    comparisons: list[dict] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)


def _audit_one(target, protocol, names, reference_date, timeout):
    rows, records, comparisons, failures = [], [], [], []
    try:
        base = collect_certificate(target, None, timeout)
    except TlsHandshakeError as exc:
        failures.append({"target_ip": str(target.address), "port": target.port, "stage": exc.stage, "detail": exc.detail})
        return rows, records, comparisons, failures
    records.append(base)
    rows.append(audit_row(base, classify_certificate(base, reference_date), protocol))
    for name in names:
        try:
            rec = collect_certificate(target, name, timeout)
        except TlsHandshakeError as exc:
            failures.append(
                {"target_ip": str(target.address), "port": target.port, "sni": name, "stage": exc.stage, "detail": exc.detail}
            )
            continue
        records.append(rec)
        rows.append(audit_row(rec, classify_certificate(rec, reference_date), protocol))
        report = compare_sni_certificates(rec, base)
        comparisons.append({
            "target_ip": str(target.address),
            "port": target.port,
            "sni": name,
            "mismatch": report.mismatch,
            "renewal": report.renewal,
            "fields": list(report.fields),
        })
    return rows, records, comparisons, failures


def audit_targets(
    targets: Sequence[tuple[TransportTarget, Optional[str]]],
    reference_date: Union[dt.date, dt.datetime],
    sni_names: Optional[dict] = None,
    timeout: float = 5.0,
    workers: int = 8,
) -> AuditRun:
    """Collect and classify the leaf certificate of each ``(target, protocol)``.

    With ``sni_names`` (address -> names), every name gets a second handshake with
    SNI and its certificate is compared against the one served without SNI.
    """
    sni_names = sni_names or {}
    jobs = [(t, p, sorted(sni_names.get(t.address, ())), reference_date, timeout) for t, p in targets]
    run = AuditRun()
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for rows, records, comparisons, failures in pool.map(lambda j: _audit_one(*j), jobs):
            run.rows += rows
            run.records += records
            run.comparisons += comparisons
            run.failures += failures
    return run
