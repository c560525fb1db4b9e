import datetime as dt
import ipaddress
import json
import socket
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vpnscope.codec import Protocol, Transport, TransportTarget
from vpnscope.mocknet import Behavior, MockProfile, spawn
from vpnscope.scan import (
    ScanConfig,
    ScanSummary,
    TargetFileError,
    TargetSequence,
    TokenBucket,
    build_probe,
    dispatch_plan,
    is_blocked,
    load_targets,
    parse_kinds,
    parse_networks,
    parse_port_overrides,
    probe,
    probe_http,
    read_ndjson,
    run_sweep,
    write_ndjson,
)

FIXED = dt.datetime(2000, 1, 1, tzinfo=dt.timezone.utc)


class FakeClock:
    def __init__(self):
        self.now = 0.0
        self.lock = threading.Lock()

    def __call__(self):
        return self.now

    def sleep(self, seconds):
        with self.lock:
            self.now += seconds


# -- target files ------------------------------------------------------------------

def test_parse_networks_comments_and_errors():
    nets = parse_networks(["# header", "10.0.0.0/30  # four", "", "192.0.2.1", "2001:db8::/127"])
    assert [str(n) for n in nets] == ["10.0.0.0/30", "192.0.2.1/32", "2001:db8::/127"]
    with pytest.raises(TargetFileError, match="targets.txt: line 2"):
        parse_networks(["10.0.0.1", "10.0.0.300"], "targets.txt")


def test_load_targets_reports_line(tmp_path):
    path = tmp_path / "t.txt"
    path.write_text("10.0.0.0/31\nnot-an-ip\n")
    with pytest.raises(TargetFileError, match="line 2"):
        load_targets(path)


@settings(max_examples=60)
@given(
    prefixes=st.lists(st.integers(22, 32), min_size=1, max_size=3),
    seed=st.integers(0, 2**32),
)
def test_target_permutation_is_a_bijection(prefixes, seed):
    nets = [ipaddress.ip_network(f"10.{i}.0.0/{p}") for i, p in enumerate(prefixes)]
    seq = list(TargetSequence(nets, seed))
    expected = {a for n in nets for a in n}
    assert len(seq) == len(expected) and set(seq) == expected


def test_target_order_seeded():
    nets = [ipaddress.ip_network("10.0.0.0/24")]
    assert list(TargetSequence(nets, 1)) == list(TargetSequence(nets, 1))
    assert list(TargetSequence(nets, 1)) != list(TargetSequence(nets, 2))
    assert list(TargetSequence(nets, 1)) != sorted(TargetSequence(nets, 1))


def test_blocklist_excluded_from_sequence():
    nets = [ipaddress.ip_network("10.0.0.0/24")]
    block = [ipaddress.ip_network("10.0.0.0/28"), ipaddress.ip_network("2001:db8::/32")]
    seq = list(TargetSequence(nets, 3, block))
    assert len(seq) == 240 and not any(is_blocked(a, block) for a in seq)


def test_dispatch_plan_order():
    cfg = ScanConfig(protocols=("ike", "pptp"), blocklist=["10.0.0.2/32"])
    addrs = [ipaddress.ip_address(a) for a in ("10.0.0.1", "10.0.0.2", "10.0.0.3")]
    plan = [(i, k, str(a)) for i, k, a in dispatch_plan(addrs, cfg)]
    assert plan == [(0, "ike", "10.0.0.1"), (1, "pptp", "10.0.0.1"), (2, "ike", "10.0.0.3"), (3, "pptp", "10.0.0.3")]


# -- configuration --------------------------------------------------------------

def test_config_validation():
    with pytest.raises(ValueError):
        ScanConfig(rate_limit=0)
    with pytest.raises(ValueError):
        ScanConfig(timeout=0)
    with pytest.raises(ValueError):
        ScanConfig(retries=11)
    with pytest.raises(ValueError, match="unknown protocol"):
        ScanConfig(protocols=("ike", "wireguard"))
    cfg = ScanConfig()
    assert cfg.retries_for(Transport.UDP) == 1 and cfg.retries_for(Transport.TCP) == 0
    assert cfg.port_for("sstp") == 443


def test_kind_and_port_parsing():
    assert parse_kinds("ike, openvpn-tcp") == ("ike", "openvpn-tcp")
    assert parse_port_overrides("ike=5000,sstp=8443") == {"ike": 5000, "sstp": 8443}
    with pytest.raises(ValueError):
        parse_port_overrides("ike:5000")


def test_probe_rng_is_per_target():
    cfg = ScanConfig(seed=4)
    t1 = TransportTarget("10.0.0.1", "udp", 500)
    t2 = TransportTarget("10.0.0.2", "udp", 500)
    assert build_probe("ike", t1, cfg).data == build_probe("ike", t1, cfg).data
    assert build_probe("ike", t1, cfg).data != build_probe("ike", t2, cfg).data


# -- token bucket ----------------------------------------------------------------

def test_bucket_starts_empty():
    clock = FakeClock()
    bucket = TokenBucket(10, burst=5, clock=clock, sleep=clock.sleep)
    for _ in range(10):
        bucket.acquire()
    assert clock.now == pytest.approx(1.0)


def test_bucket_burst_after_idle():
    clock = FakeClock()
    bucket = TokenBucket(10, burst=5, clock=clock, sleep=clock.sleep)
    clock.now = 100.0
    for _ in range(5):
        bucket.acquire()
    assert clock.now == 100.0
    bucket.acquire()
    assert clock.now == pytest.approx(100.1)


@settings(max_examples=50)
@given(
    rate=st.floats(1, 1000),
    burst=st.integers(1, 20),
    idles=st.lists(st.floats(0, 2), min_size=1, max_size=80),
)
def test_bucket_window_bound(rate, burst, idles):
    clock = FakeClock()
    bucket = TokenBucket(rate, burst=burst, clock=clock, sleep=clock.sleep)
    grants = []
    for idle in idles:
        clock.now += idle
        bucket.acquire()
        grants.append(clock.now)
    for i, start in enumerate(grants):
        for j in range(i, len(grants)):
            span = grants[j] - start
            assert j - i + 1 <= rate * span + burst + 1e-6


def test_bucket_rejects_bad_parameters():
    with pytest.raises(ValueError):
        TokenBucket(0)
    with pytest.raises(ValueError):
        TokenBucket(1, burst=0)


# -- probes against mocks ----------------------------------------------------------

def _cfg(**kw):
    base = dict(rate_limit=1000, timeout=300, fixed_time=FIXED, workers=4)
    base.update(kw)
    return ScanConfig(**base)


def test_sweep_over_grid(grid):
    cfg = _cfg(ports={k: grid.ports[k] for k in ("ike", "pptp", "openvpn", "sstp")})
    addrs = [ipaddress.ip_address(a) for a in grid.roles.values()]
    summary = ScanSummary()
    results = list(run_sweep(cfg, addrs, summary))
    assert len(results) == 28 == summary.results
    hits = {(str(r.target.address), r.verdict.protocol.value) for r in results if r.verdict.detected}
    assert hits == set(grid.expected.items())
    silent = [r for r in results if str(r.target.address) == grid.roles["silent"]]
    assert all(not r.verdict.detected for r in silent)
    assert {r.attempt for r in silent if r.target.transport is Transport.UDP} == {2}
    pptp = next(r for r in results if r.verdict.detected and r.verdict.protocol is Protocol.PPTP)
    assert pptp.verdict.vendor == "MikroTik"
    web_sstp = next(r for r in results if str(r.target.address) == grid.roles["web"] and r.kind == "sstp")
    assert web_sstp.verdict.evidence == ["HTTP 404"]


def test_fixed_time_drops_rtt(grid):
    cfg = _cfg(ports={"ike": grid.ports["ike"]}, protocols=("ike",))
    result = probe("ike", grid.roles["ike"], cfg)
    row = result.to_json()
    assert "rtt_ms" not in row and row["timestamp"] == "2000-01-01T00:00:00Z"
    live = probe("ike", grid.roles["ike"], _cfg(ports={"ike": grid.ports["ike"]}, fixed_time=None))
    assert live.rtt is not None and live.rtt >= 0


def test_refused_tcp():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    result = probe("pptp", "127.0.0.1", _cfg(ports={"pptp": port}))
    assert not result.verdict.detected and result.verdict.evidence == ["connection refused"]


def test_blocklisted_probe_never_sent():
    with spawn(MockProfile("ike", address="127.0.0.1")) as ep:
        cfg = _cfg(ports={"ike": ep.port}, blocklist=["127.0.0.0/8"])
        result = probe("ike", "127.0.0.1", cfg)
        assert not result.verdict.detected
        assert ep.packets == []


def test_delayed_response_within_timeout_detected():
    with spawn(MockProfile("ike", behavior=Behavior.DELAYED, delay=0.1, address="127.0.0.1")) as ep:
        result = probe("ike", "127.0.0.1", _cfg(ports={"ike": ep.port}, timeout=1000))
    assert result.verdict.detected


def test_delayed_response_past_timeout_missed():
    with spawn(MockProfile("pptp", behavior=Behavior.DELAYED, delay=1.0, address="127.0.0.1")) as ep:
        result = probe("pptp", "127.0.0.1", _cfg(ports={"pptp": ep.port}, timeout=200))
    assert not result.verdict.detected


@pytest.mark.parametrize("km", ["km1", "km2"])
def test_openvpn_key_methods(km):
    with spawn(MockProfile("openvpn", key_method=km, address="127.0.0.1")) as ep:
        result = probe("openvpn", "127.0.0.1", _cfg(ports={"openvpn": ep.port}, openvpn_key_method=km))
    assert result.verdict.detected and result.verdict.key_method.value == km


def test_openvpn_tls_auth_server_ignores_unsigned_probe():
    with spawn(MockProfile("openvpn", openvpn_hmac="tls-auth", address="127.0.0.1")) as ep:
        plain = probe("openvpn", "127.0.0.1", _cfg(ports={"openvpn": ep.port}, retries=0))
    assert not plain.verdict.detected


def test_openvpn_tcp_kind():
    with spawn(MockProfile("openvpn", transport="tcp", address="127.0.0.1")) as ep:
        result = probe("openvpn-tcp", "127.0.0.1", _cfg(ports={"openvpn-tcp": ep.port}))
    assert result.verdict.detected and "tcp length framing" in result.verdict.evidence
    assert result.to_json()["protocol"] == "openvpn"


def test_probe_http(grid):
    cfg = _cfg()
    assert probe_http(grid.roles["web"], grid.ports["web"], cfg).responded
    assert not probe_http(grid.roles["silent"], grid.ports["web"], cfg).responded


def test_ndjson_sorted_by_dispatch(tmp_path, grid):
    cfg = _cfg(ports={k: grid.ports[k] for k in ("ike", "pptp", "openvpn", "sstp")}, workers=8)
    addrs = [ipaddress.ip_address(a) for a in sorted(grid.roles.values())]
    results = list(run_sweep(cfg, addrs))
    path = tmp_path / "scan.ndjson"
    write_ndjson(results, path)
    rows = read_ndjson(path)
    assert [(r["target_ip"], r["port"]) for r in rows] == [
        (str(a), cfg.port_for(k)) for _, k, a in dispatch_plan(addrs, cfg)
    ]
    first = json.loads(path.read_text().splitlines()[0])
    assert list(first)[:6] == ["target_ip", "transport", "port", "protocol", "detected", "evidence"]
