"""Build each VPN probe, replay the recorded responses from fixtures/ and print the verdicts.

Run: python3 demos/probe_codecs.py
"""
import random
from pathlib import Path

from vpnscope.codec import (
    build_ike_probe,
    build_openvpn_probe,
    build_pptp_probe,
    build_sstp_request,
    load_hex,
    parse_response,
)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
rng = lambda: random.Random(7)  # noqa: E731 - the seed the fixtures were recorded with

cases = [
    (build_ike_probe(rng()), ["ike/response_sa.hex", "ike/response_notify.hex", "ike/negative_cookie_mismatch.hex"]),
    (build_pptp_probe(), ["pptp/response_sccrp_mikrotik.hex", "pptp/response_sccrp_draytek.hex", "pptp/negative_bad_magic.hex"]),
    (build_openvpn_probe("udp", "km2", "none", rng()), ["openvpn/response_udp_km2.hex", "openvpn/negative_wrong_ack.hex"]),
    (build_openvpn_probe("tcp", "km1", "none", rng()), ["openvpn/response_tcp_km1.hex"]),
    (build_sstp_request("vpn.example.test", rng()), ["sstp/response_200.hex", "sstp/negative_404.hex"]),
]

for probe, responses in cases:
    print(f"{probe.protocol.value} probe ({probe.variant or 'default'}), {len(probe.data)} octets")
    for name in responses:
        verdict = parse_response(probe, load_hex(FIXTURES / name))
        extra = f" vendor={verdict.vendor}" if verdict.vendor else ""
        extra += f" key_method={verdict.key_method.value}" if verdict.key_method else ""
        print(f"  {name:40s} detected={verdict.detected!s:5s}{extra}  {'; '.join(verdict.evidence)}")

# Arbitrary bytes never raise; they simply come back negative.
junk = random.Random(1).randbytes(300)
print("random bytes:", {p.protocol.value: parse_response(p, junk).detected for p, _ in cases})
