"""Label a small synthetic flow set by hitlist, port and domain name, then show the shares.

Run: python3 demos/traffic_shares.py
"""
import datetime as dt
import ipaddress
import random
from pathlib import Path

from vpnscope.traffic import DnsMapping, FlowRecord, Hitlist, PublicSuffixList, classify_flows, traffic_report

PSL = Path(__file__).resolve().parent.parent / "fixtures" / "psl" / "public_suffix_test.dat"
rng = random.Random(3)
t0 = dt.datetime(2024, 3, 4, tzinfo=dt.timezone.utc)

hitlist = Hitlist(frozenset({ipaddress.ip_address("198.51.100.1")}), frozenset({ipaddress.ip_address("198.51.100.2")}))
dns = DnsMapping.from_rows([
    ("203.0.113.5", "myvpn.example.org", "resolver_capture"),   # counts: "vpn" left of the suffix
    ("203.0.113.6", "www.vpn.example.org", "resolver_capture"), # www. names never count
    ("203.0.113.7", "vpn-203-0-113-7.isp.example", "rdns"),     # synthetic PTR, dropped
]).without_synthetic_rdns()

destinations = [("198.51.100.1", 443), ("198.51.100.2", 443), ("192.0.2.9", 4500), ("203.0.113.5", 443),
                ("203.0.113.6", 443), ("203.0.113.7", 443), ("192.0.2.50", 80)]
flows = []
for _ in range(2000):
    dst, port = rng.choice(destinations)
    transport = "udp" if port == 4500 else "tcp"
    start = t0 + dt.timedelta(minutes=rng.randrange(48 * 60))
    flows.append(FlowRecord(start, "10.1.2.3", dst, transport, rng.randrange(49152, 65536), port, rng.randrange(100, 10**6)))

report = traffic_report(classify_flows(flows, hitlist, dns, PublicSuffixList.load(PSL)), "6h")
for method in ("hitlist", "port", "domain"):
    print(f"{method:8s} {report.method_bytes[method]:>12d} bytes  {report.share(method):7.2%}")
print(f"{'any':8s} {report.union_bytes:>12d} bytes  {report.union_share:7.2%}")
print(f"hitlist&port overlap: {report.overlap_share('hitlist', 'port'):.2%}\n")
print(report.series_csv())
