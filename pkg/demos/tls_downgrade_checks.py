"""Run every suggestion-based TLS check against three mock server personalities.

Run: python3 demos/tls_downgrade_checks.py
"""
from vpnscope.codec import TransportTarget
from vpnscope.mocknet import MockProfile, TlsConfig, heartbleed_tls, legacy_tls, modern_tls, spawn
from vpnscope.tls.vuln import run_all_checks

profiles = {
    "modern (TLS 1.2/1.3, AEAD only)": modern_tls(),
    "legacy (SSL3, RC4, RSA key exchange)": legacy_tls(),
    "heartbeat over-read": heartbleed_tls(),
    "SSLv2 still enabled": TlsConfig(engine="synthetic", versions=("SSL2", "TLS12"), cipher_classes=("modern",)),
}

for label, cfg in profiles.items():
    with spawn(MockProfile("web", tls_config=cfg)) as ep:
        run = run_all_checks([TransportTarget(ep.address, "tcp", ep.port)], timeout=3, workers=1)
    print(label)
    for finding in run.findings:
        mark = "VULNERABLE" if finding.vulnerable else "ok"
        print(f"  {finding.vuln_id.value:10s} {mark:10s} {finding.detail}")
