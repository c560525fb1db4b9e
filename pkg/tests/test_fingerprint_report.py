import json
import random
import socket

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vpnscope import report
from vpnscope.fingerprint import (
    NO_VENDOR,
    PortSweepResult,
    load_port_list,
    port_heatmap,
    port_sweep,
    sweep_hosts,
    vendor_distribution,
)
from vpnscope.report import ALL_SUBSETS, overlap_summary, render_summary


def row(ip, protocol, detected=True, vendor=None, transport=None, port=0):
    transport = transport or ("udp" if protocol in ("ike", "openvpn") else "tcp")
    r = {"target_ip": ip, "transport": transport, "port": port, "protocol": protocol, "detected": detected, "evidence": []}
    if vendor is not None:
        r["vendor"] = vendor
    return r


# -- vendors -----------------------------------------------------------------------

def test_vendor_distribution_top_n_and_other():
    rows = [row(f"10.0.0.{i}", "pptp", vendor=v) for i, v in enumerate(["A"] * 5 + ["B"] * 3 + ["C"] * 2 + ["D", "E"])]
    rows += [row("10.0.1.1", "pptp"), row("10.0.1.2", "pptp", detected=False, vendor="A"), row("10.0.1.3", "sstp", vendor="A")]
    dist = vendor_distribution(rows, "pptp", top_n=3)
    assert dist.total == 13
    assert [(v, c) for v, c, _ in dist.entries] == [("A", 5), ("B", 3), ("C", 2)]
    assert (dist.other_vendors, dist.other_count) == (3, 3)  # D, E and the vendorless server
    full = vendor_distribution(rows, "pptp", top_n=10)
    assert (NO_VENDOR, 1, 1 / 13) in full.entries


@settings(max_examples=100)
@given(st.lists(st.sampled_from(["A", "B", "C", "D", None]), max_size=40), st.integers(1, 6))
def test_vendor_shares_sum_to_one(vendors, top_n):
    dist = vendor_distribution([row("10.0.0.1", "sstp", vendor=v) for v in vendors], "sstp", top_n)
    assert dist.total == len(vendors)
    assert sum(c for _, c, _ in dist.entries) + dist.other_count == dist.total
    if vendors:
        assert sum(s for _, _, s in dist.entries) + dist.other_share == pytest.approx(1.0)
    counts = [c for _, c, _ in dist.entries]
    assert counts == sorted(counts, reverse=True)


def test_empty_distribution():
    dist = vendor_distribution([], "pptp")
    assert dist.total == 0 and dist.entries == [] and dist.to_json()["other"]["share"] == 0.0


# -- port sweep --------------------------------------------------------------------

@pytest.fixture
def listener():
    sock = socket.socket()
    sock.bind(("127.0.0.1", 0))
    sock.listen(8)
    yield sock.getsockname()[1]
    sock.close()


def _closed_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def test_port_sweep_finds_listener(listener):
    closed = _closed_port()
    result = port_sweep("127.0.0.1", [listener, closed, listener], timeout=0.5, rng=random.Random(1))
    assert result.open_ports == {listener}
    assert sorted(result.scanned_ports) == sorted({listener, closed})


def test_port_sweep_order_is_shuffled_and_seeded():
    ports = list(range(40000, 40040))
    a = sweep_hosts(["127.0.0.9"], ports, timeout=0.05, seed=3, workers=1)[0]
    b = sweep_hosts(["127.0.0.9"], ports, timeout=0.05, seed=3, workers=1)[0]
    assert a.scanned_ports == b.scanned_ports and list(a.scanned_ports) != ports


def test_port_sweep_validation():
    with pytest.raises(ValueError):
        port_sweep("127.0.0.1", [])
    with pytest.raises(ValueError):
        PortSweepResult("127.0.0.1", frozenset({80}), (443,))


def test_heatmap_shares():
    sweeps = {
        "pptp": [PortSweepResult("10.0.0.1", frozenset({22, 1723}), (22, 80, 1723)),
                 PortSweepResult("10.0.0.2", frozenset({1723}), (22, 80, 1723))],
        "sstp": [PortSweepResult("10.0.0.3", frozenset({80}), (22, 80, 1723))],
        "ike": [],
    }
    heat = port_heatmap(sweeps)
    assert heat.protocols == ["pptp", "sstp"] and heat.ports == [22, 80, 1723]
    assert heat.cell("pptp", 22) == 0.5 and heat.cell("pptp", 1723) == 1.0 and heat.cell("sstp", 80) == 1.0
    lines = heat.to_csv().splitlines()
    assert lines[0] == "protocol,hosts,22,80,1723" and lines[1] == "pptp,2,0.500000,0.000000,1.000000"


def test_load_port_list():
    assert load_port_list("22, 80\n# comment\n443 1723  # vpn\n") == [22, 80, 443, 1723]
    with pytest.raises(ValueError):
        load_port_list("70000")


# -- overlap -----------------------------------------------------------------------

def test_overlap_counts_exact_sets():
    rows = [
        row("10.0.0.1", "ike"), row("10.0.0.1", "sstp"),
        row("10.0.0.2", "openvpn", transport="udp"), row("10.0.0.2", "openvpn", transport="tcp"),
        row("10.0.0.3", "openvpn", transport="tcp"), row("10.0.0.3", "pptp", detected=False),
        row("10.0.0.4", "pptp"), row("10.0.0.5", "ike", detected=False),
    ]
    ov = overlap_summary(rows)
    assert ov.addresses == 4
    assert ov.subsets[frozenset({"ike", "sstp"})] == 1
    assert ov.subsets[frozenset({"openvpn"})] == 2
    assert ov.subsets[frozenset({"pptp"})] == 1
    assert (ov.openvpn_udp, ov.openvpn_tcp, ov.openvpn_both) == (1, 2, 1)
    assert ov.supporting("openvpn") == 2 and ov.supporting("ike") == 1
    assert len(ALL_SUBSETS) == 15


@settings(max_examples=100)
@given(st.lists(st.tuples(st.integers(1, 8), st.sampled_from(["ike", "pptp", "openvpn", "sstp"]), st.booleans()), max_size=40))
def test_overlap_partitions_addresses(entries):
    rows = [row(f"10.0.0.{i}", p, d) for i, p, d in entries]
    ov = overlap_summary(rows)
    assert sum(ov.subsets.values()) == ov.addresses == len({i for i, _, d in entries if d})


# -- summary -----------------------------------------------------------------------

def test_render_summary_from_artifacts(tmp_path):
    report.write_ndjson([row("10.0.0.1", "pptp", vendor="MikroTik"), row("10.0.0.2", "ike"), row("10.0.0.3", "ike", False)],
                        tmp_path / "scan.ndjson")
    (tmp_path / "hitlist.csv").write_text("ip,set\n10.0.0.1,vpn_only\n10.0.0.2,vpn_and_web\n")
    (tmp_path / "vendors.json").write_text(json.dumps({"pptp": vendor_distribution(
        report.read_ndjson(tmp_path / "scan.ndjson"), "pptp").to_json()}))
    text = render_summary(tmp_path)
    assert "Detections (3 addresses probed)" in text
    assert "also answering HTTP: 50.00%" in text
    assert "PPTP vendors (1 servers)" in text and "MikroTik" in text
    assert render_summary(tmp_path) == text


def test_render_summary_empty_dir(tmp_path):
    assert render_summary(tmp_path) == "\n"
