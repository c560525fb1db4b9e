"""Certificate factory for mock endpoints and the classification corpus."""
from __future__ import annotations

import datetime as dt
import ipaddress
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from cryptography import x509
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import ec, rsa
from cryptography.x509.oid import NameOID

UTC = dt.timezone.utc


def new_key(kind: str = "ec"):
    if kind == "rsa":
        return rsa.generate_private_key(public_exponent=65537, key_size=2048)
    return ec.generate_private_key(ec.SECP256R1())


def make_name(cn: Optional[str] = None, org: Optional[str] = None) -> x509.Name:
    attrs = []
    if org is not None:
        attrs.append(x509.NameAttribute(NameOID.ORGANIZATION_NAME, org))
    if cn is not None:
        attrs.append(x509.NameAttribute(NameOID.COMMON_NAME, cn))
    return x509.Name(attrs)


@dataclass
class Issued:
    certificate: x509.Certificate
    key: object

    @property
    def der(self) -> bytes:
        return self.certificate.public_bytes(serialization.Encoding.DER)

    @property
    def pem(self) -> bytes:
        return self.certificate.public_bytes(serialization.Encoding.PEM)

    @property
    def key_pem(self) -> bytes:
        return self.key.private_bytes(
            serialization.Encoding.PEM, serialization.PrivateFormat.PKCS8, serialization.NoEncryption()
        )

    def write(self, directory: Path, stem: str) -> tuple[Path, Path]:
        directory.mkdir(parents=True, exist_ok=True)
        cert_path, key_path = directory / f"{stem}.pem", directory / f"{stem}.key"
        cert_path.write_bytes(self.pem)
        key_path.write_bytes(self.key_pem)
        return cert_path, key_path


@dataclass
class CertSpec:
    """Declarative description of one certificate to mint."""

    subject_cn: Optional[str] = "vpn.example.test"
    subject_org: Optional[str] = None
    issuer_cn: Optional[str] = None  # None: same as subject (self-issued)
    issuer_org: Optional[str] = None
    not_before: dt.datetime = dt.datetime(2021, 1, 1, tzinfo=UTC)
    not_after: dt.datetime = dt.datetime(2031, 1, 1, tzinfo=UTC)
    san: list[str] = field(default_factory=list)
    # sign with the certificate's own key even when issuer differs, or with a foreign key when self-issued
    self_key_signs: Optional[bool] = None
    subject_key_id: bool = True
    authority_key_id: bool = True
    serial: Optional[int] = None


def _san_entries(names: list[str]) -> list[x509.GeneralName]:
    out: list[x509.GeneralName] = []
    for name in names:
        try:
            out.append(x509.IPAddress(ipaddress.ip_address(name)))
        except ValueError:
            out.append(x509.DNSName(name))
    return out


def issue(spec: CertSpec, key=None, issuer: Optional[Issued] = None) -> Issued:
    """Mint a certificate.

    With ``issuer`` the certificate is CA-signed by it. Otherwise the issuer name comes
    from ``spec`` and the signing key is chosen by ``spec.self_key_signs`` (default: sign
    with the subject key exactly when subject and issuer names coincide).
    """
    key = key or new_key()
    subject = make_name(spec.subject_cn, spec.subject_org)
    if issuer is not None:
        issuer_name = issuer.certificate.subject
        signing_key = issuer.key
    else:
        if spec.issuer_cn is None and spec.issuer_org is None:
            issuer_name = subject
        else:
            issuer_name = make_name(spec.issuer_cn, spec.issuer_org)
        self_signs = spec.self_key_signs if spec.self_key_signs is not None else issuer_name == subject
        signing_key = key if self_signs else new_key()

    builder = (
        x509.CertificateBuilder()
        .subject_name(subject)
        .issuer_name(issuer_name)
        .public_key(key.public_key())
        .serial_number(spec.serial or x509.random_serial_number())
        .not_valid_before(spec.not_before)
        .not_valid_after(spec.not_after)
    )
    if spec.san:
        builder = builder.add_extension(x509.SubjectAlternativeName(_san_entries(spec.san)), critical=False)
    if spec.subject_key_id:
        builder = builder.add_extension(x509.SubjectKeyIdentifier.from_public_key(key.public_key()), critical=False)
    if spec.authority_key_id:
        builder = builder.add_extension(
            x509.AuthorityKeyIdentifier.from_issuer_public_key(signing_key.public_key()), critical=False
        )
    return Issued(builder.sign(signing_key, hashes.SHA256()), key)


def make_ca(cn: str = "Mock Root CA", org: Optional[str] = "Mock Trust Services") -> Issued:
    key = new_key()
    name = make_name(cn, org)
    cert = (
        x509.CertificateBuilder()
        .subject_name(name)
        .issuer_name(name)
        .public_key(key.public_key())
        .serial_number(x509.random_serial_number())
        .not_valid_before(dt.datetime(2020, 1, 1, tzinfo=UTC))
        .not_valid_after(dt.datetime(2040, 1, 1, tzinfo=UTC))
        .add_extension(x509.BasicConstraints(ca=True, path_length=None), critical=True)
        .add_extension(x509.SubjectKeyIdentifier.from_public_key(key.public_key()), critical=False)
        .sign(key, hashes.SHA256())
    )
    return Issued(cert, key)


def ca_issued(ca: Issued, spec: CertSpec, key=None) -> Issued:
    return issue(spec, key=key, issuer=ca)
