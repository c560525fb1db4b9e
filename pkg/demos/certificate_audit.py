"""Classify the generated certificate corpus and compare certificates served with and without SNI.

Run: python3 demos/certificate_audit.py
"""
import datetime as dt
import json
from pathlib import Path

from cryptography import x509
from cryptography.hazmat.primitives.serialization import Encoding

from vpnscope.codec import TransportTarget
from vpnscope.mocknet import MockProfile, TlsConfig, spawn
from vpnscope.tls.audit import (
    classify_certificate,
    collect_certificate,
    compare_sni_certificates,
    expiry_distribution,
    flag_table,
    record_from_der,
)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures" / "certs"
manifest = json.loads((FIXTURES / "corpus" / "manifest.json").read_text())
ref = dt.date.fromisoformat(manifest["reference_date"])


def load(path):
    return record_from_der(x509.load_pem_x509_certificate(path.read_bytes()).public_bytes(Encoding.DER))


records = {name: load(FIXTURES / "corpus" / name) for name in manifest["certificates"]}

# A few corpus entries side by side: subject/issuer CNs against the four flags.
for name in sorted(records)[::7]:
    rec, flags = records[name], classify_certificate(records[name], ref)
    print(f"{name:45s} {rec.subject_cn!s:12s} <- {rec.issuer_cn!s:12s} {flags}")

print("\nflag counts:", flag_table(records.values(), ref))
days = sorted(expiry_distribution(records.values(), ref))
print(f"expired certificates: {len(days)}, days past expiry: min {days[0]}, max {days[-1]}")

# A virtual-host server that picks its certificate by SNI.
sni = FIXTURES / "sni"
pair = lambda stem: (str(sni / f"{stem}.pem"), str(sni / f"{stem}.key"))  # noqa: E731
cfg = TlsConfig(cert_file=pair("default")[0], key_file=pair("default")[1],
                sni_certs={"other.test": pair("other"), "renewed.test": pair("renewed"), "same.test": pair("default")})
with spawn(MockProfile("web", tls_config=cfg)) as ep:
    target = TransportTarget(ep.address, "tcp", ep.port)
    base = collect_certificate(target, None, 3)
    print(f"\nwithout SNI: CN={base.subject_cn}, valid until {base.not_after:%Y-%m-%d}")
    for name in ("other.test", "renewed.test", "same.test"):
        report = compare_sni_certificates(collect_certificate(target, name, 3), base)
        print(f"SNI {name:13s} mismatch={report.mismatch!s:5s} renewal={report.renewal!s:5s} fields={list(report.fields)}")
