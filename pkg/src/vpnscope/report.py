"""Protocol-overlap counts and the plain-text summary rendered from pipeline artifacts."""
from __future__ import annotations

import csv
import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping, Optional, Union

from .tls.vuln import VulnId

VPN_PROTOCOLS = ("ike", "pptp", "openvpn", "sstp")
ALL_SUBSETS = tuple(frozenset(c) for n in range(1, 5) for c in combinations(VPN_PROTOCOLS, n))

ARTIFACTS = {
    "scan": "scan.ndjson",
    "web": "web.ndjson",
    "hitlist": "hitlist.csv",
    "certs": "certs.ndjson",
    "sni": "sni.ndjson",
    "tls_failures": "tls_failures.ndjson",
    "vuln": "vuln.ndjson",
    "vendors": "vendors.json",
    "ports": "ports.ndjson",
    "heatmap": "heatmap.csv",
    "traffic": "traffic.json",
    "traffic_csv": "traffic.csv",
    "traffic_series": "traffic_series.csv",
    "summary": "summary.txt",
}


def _row(result) -> dict:
    return result if isinstance(result, Mapping) else result.to_json()


@dataclass
class OverlapSummary:
    subsets: dict = field(default_factory=lambda: {s: 0 for s in ALL_SUBSETS})
    addresses: int = 0
    openvpn_udp: int = 0
    openvpn_tcp: int = 0
    openvpn_both: int = 0

    def supporting(self, protocol: str) -> int:
        return sum(n for s, n in self.subsets.items() if protocol in s)


def overlap_summary(results: Iterable) -> OverlapSummary:
    """Addresses per exact set of detected protocols; OpenVPN over UDP and TCP counts once."""
    protocols: dict[str, set] = defaultdict(set)
    openvpn: dict[str, set] = defaultdict(set)
    for result in results:
        row = _row(result)
        if not row.get("detected") or row.get("protocol") not in VPN_PROTOCOLS:
            continue
        protocols[row["target_ip"]].add(row["protocol"])
        if row["protocol"] == "openvpn":
            openvpn[row["target_ip"]].add(row["transport"])
    out = OverlapSummary(addresses=len(protocols))
    for found in protocols.values():
        out.subsets[frozenset(found)] += 1
    for transports in openvpn.values():
        out.openvpn_udp += "udp" in transports
        out.openvpn_tcp += "tcp" in transports
        out.openvpn_both += transports == {"udp", "tcp"}
    return out


# -- artifact I/O ---------------------------------------------------------------

def write_ndjson(rows: Iterable[Mapping], path: Union[str, Path]) -> int:
    n = 0
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
            n += 1
    return n


def read_ndjson(path: Union[str, Path]) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _maybe(out_dir: Path, name: str):
    path = out_dir / ARTIFACTS[name]
    if not path.exists():
        return None
    if path.suffix == ".ndjson":
        return read_ndjson(path)
    if path.suffix == ".json":
        return json.loads(path.read_text())
    if path.suffix == ".csv":
        with path.open(newline="") as fh:
            return list(csv.reader(fh))
    return path.read_text()


# -- text tables ----------------------------------------------------------------

def table(headers: list[str], rows: list[list]) -> str:
    cells = [[str(c) for c in headers]] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = []
    for k, r in enumerate(cells):
        lines.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))).rstrip())
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _pct(n: float) -> str:
    return f"{100 * n:.2f}%"


def _scan_section(rows: list[dict]) -> str:
    probed: Counter = Counter()
    detected: Counter = Counter()
    addresses = set()
    for r in rows:
        key = (r["protocol"], r["transport"])
        probed[key] += 1
        detected[key] += r["detected"]
        addresses.add(r["target_ip"])
    body = [[f"{p}/{t}", probed[(p, t)], detected[(p, t)]] for p, t in sorted(probed)]
    body.append(["total", sum(probed.values()), sum(detected.values())])
    out = [f"Detections ({len(addresses)} addresses probed)", table(["protocol", "probed", "detected"], body)]

    ov = overlap_summary(rows)
    # ALL_SUBSETS is already ordered by size, then protocol order
    subset_rows = [["+".join(p for p in VPN_PROTOCOLS if p in s), ov.subsets[s]] for s in ALL_SUBSETS]
    out += [
        "",
        f"Protocol overlap ({ov.addresses} VPN addresses)",
        table(["protocols", "addresses"], subset_rows),
        "",
        "OpenVPN transports",
        table(["transport", "addresses"], [["udp", ov.openvpn_udp], ["tcp", ov.openvpn_tcp], ["udp+tcp", ov.openvpn_both]]),
    ]
    return "\n".join(out)


def _hitlist_section(rows: list[list[str]]) -> str:
    counts = Counter(r[1] for r in rows[1:] if len(r) > 1)
    total = counts["vpn_only"] + counts["vpn_and_web"]
    share = counts["vpn_and_web"] / total if total else 0.0
    return "\n".join([
        "VPN hitlist",
        table(["set", "addresses"], [["vpn_only", counts["vpn_only"]], ["vpn_and_web", counts["vpn_and_web"]]]),
        f"also answering HTTP: {_pct(share)}",
    ])


def _cert_section(rows: list[dict], sni: Optional[list[dict]], failures: Optional[list[dict]]) -> str:
    base = [r for r in rows if "sni" not in r]
    seen, unique, no_fp = set(), [], []
    for r in base:
        fp = r.get("fingerprint")
        if fp is None:
            no_fp.append(r)
        elif fp not in seen:
            seen.add(fp)
            unique.append(r)
    analyzed = unique + no_fp
    flags = ["expired", "self_issued", "self_signed", "snake_oil"]
    body = [["certificates", len(analyzed)]]
    body.append(["valid", sum(not r["expired"] for r in analyzed)])
    body += [[f, sum(r[f] for r in analyzed)] for f in flags]
    out = [
        f"Certificates ({len(base)} collected, {len(unique)} unique fingerprints)",
        table(["flag", "count"], body),
    ]
    issuers = Counter(r.get("issuer_org") or "N/S" for r in analyzed)
    if issuers:
        top = sorted(issuers.items(), key=lambda kv: (-kv[1], kv[0]))[:10]
        out += ["", "Issuer organizations", table(["issuer", "count"], [[k, v] for k, v in top])]
    if sni:
        fields = Counter(f for c in sni for f in c["fields"])
        body = [
            ["pairs", len(sni)],
            ["certificate mismatches", sum(c["mismatch"] for c in sni)],
            ["renewals", sum(c["renewal"] for c in sni)],
        ] + [[f"{f} differs", n] for f, n in sorted(fields.items())]
        out += ["", "SNI vs. no-SNI certificates", table(["measure", "count"], body)]
    if failures:
        stages = Counter(f["stage"] for f in failures)
        out += ["", "Certificate collection failures", table(["stage", "count"], sorted(map(list, stages.items())))]
    return "\n".join(out)


def _vuln_section(rows: list[dict], scan_rows: Optional[list[dict]]) -> str:
    proto_of = {}
    for r in scan_rows or ():
        if r["detected"]:
            proto_of[(r["target_ip"], r["port"])] = r["protocol"]
    columns = sorted({proto_of.get((r["target_ip"], r.get("port")), "other") for r in rows})
    tested: Counter = Counter()
    vulnerable: Counter = Counter()
    for r in rows:
        proto = proto_of.get((r["target_ip"], r.get("port")), "other")
        tested[(r["vuln"], proto)] += "error" not in r
        vulnerable[(r["vuln"], proto)] += r["vulnerable"]
    body = []
    for v in VulnId:
        body.append([v.value] + [f"{vulnerable[(v.value, c)]}/{tested[(v.value, c)]}" for c in columns])
    return "\n".join(["Vulnerable servers (vulnerable/tested)", table(["check", *columns], body)])


def _vendor_section(data: dict) -> str:
    out = []
    for proto, dist in sorted(data.items()):
        body = [[e["vendor"], e["count"], _pct(e["share"])] for e in dist["entries"]]
        if dist["other"]["vendors"]:
            o = dist["other"]
            body.append([f"other ({o['vendors']} vendors)", o["count"], _pct(o["share"])])
        out += [f"{proto.upper()} vendors ({dist['total']} servers)", table(["vendor", "servers", "share"], body), ""]
    return "\n".join(out).rstrip()


def _heatmap_section(rows: list[list[str]]) -> str:
    header, body = rows[0], rows[1:]
    cells = [[r[0], r[1]] + [_pct(float(v)) for v in r[2:]] for r in body]
    return "\n".join(["Open ports (share of swept hosts)", table(header, cells)])


def _traffic_section(data: dict) -> str:
    body = [[m, v["bytes"], _pct(v["share"])] for m, v in data["methods"].items()]
    body.append(["any method", data["union"]["bytes"], _pct(data["union"]["share"])])
    overlaps = [[k, v["bytes"], _pct(v["share"]), _pct(v["of_union"])] for k, v in data["overlaps"].items()]
    return "\n".join([
        f"Traffic ({data['flows']} flows, {data['total_bytes']} bytes)",
        table(["method", "bytes", "share"], body),
        "",
        table(["overlap", "bytes", "of total", "of detected"], overlaps),
    ])


def render_summary(out_dir: Union[str, Path]) -> str:
    """Build the summary from whichever artifacts exist in ``out_dir``."""
    out_dir = Path(out_dir)
    scan = _maybe(out_dir, "scan")
    sections = []
    if scan is not None:
        sections.append(_scan_section(scan))
    hitlist = _maybe(out_dir, "hitlist")
    if hitlist is not None:
        sections.append(_hitlist_section(hitlist))
    certs = _maybe(out_dir, "certs")
    if certs is not None:
        sections.append(_cert_section(certs, _maybe(out_dir, "sni"), _maybe(out_dir, "tls_failures")))
    vuln = _maybe(out_dir, "vuln")
    if vuln is not None:
        sections.append(_vuln_section(vuln, scan))
    vendors = _maybe(out_dir, "vendors")
    if vendors is not None:
        sections.append(_vendor_section(vendors))
    heatmap = _maybe(out_dir, "heatmap")
    if heatmap:
        sections.append(_heatmap_section(heatmap))
    traffic = _maybe(out_dir, "traffic")
    if traffic is not None:
        sections.append(_traffic_section(traffic))
    return "\n\n".join(s for s in sections if s) + "\n"


def write_summary(out_dir: Union[str, Path]) -> Path:
    path = Path(out_dir) / ARTIFACTS["summary"]
    path.write_text(render_summary(out_dir))
    return path
