"""Command line entry point: ``vpnscope <subcommand> ...``.

Exit codes: 0 success, 1 configuration error, 2 stage failure.
"""
from __future__ import annotations

import argparse
import datetime as dt
import ipaddress
import json
import logging
import signal
import sys
import threading
from pathlib import Path
from typing import Optional, Sequence

from . import report
from .fingerprint import load_port_list
from .pipeline import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_STAGE,
    PipelineConfig,
    fixed_instant,
    run_pipeline,
)
from .scan import DEFAULT_KINDS, parse_kinds, parse_port_overrides
from .tls.vuln import VulnId

log = logging.getLogger("vpnscope")

# Pinned clock for reproducible runs when --fixed-time is given without a value.
DEFAULT_FIXED_TIME = "2000-01-01T00:00:00Z"


class ConfigError(Exception):
    pass


def _global_flags(parser: argparse.ArgumentParser, suppress: bool):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=argparse.SUPPRESS if suppress else 0)
    parser.add_argument("--out-dir", type=Path, default=argparse.SUPPRESS if suppress else Path("."))
    parser.add_argument(
        "--log-level", default=argparse.SUPPRESS if suppress else "WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
    )
    parser.add_argument(
        "--fixed-time", nargs="?", const=DEFAULT_FIXED_TIME, default=default, metavar="ISO8601",
        help="pin every timestamp (and drop round-trip times) for byte-identical output",
    )


def _scan_flags(p: argparse.ArgumentParser, targets_required: bool):
    p.add_argument("--targets", type=Path, required=targets_required, help="addresses/CIDRs, one per line")
    p.add_argument("--protocols", default=",".join(DEFAULT_KINDS), help="comma list; add openvpn-tcp for OpenVPN over TCP")
    p.add_argument("--rate", type=float, default=100.0, help="probes per second")
    p.add_argument("--timeout", type=float, default=1000.0, help="milliseconds")
    p.add_argument("--retries", type=int, default=None)
    p.add_argument("--blocklist", type=Path)
    p.add_argument("--ports", default="", help="per-protocol port overrides, e.g. ike=5000,sstp=8443")
    p.add_argument("--workers", type=int, default=32)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vpnscope", description="VPN endpoint discovery and audit")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, help_text):
        p = sub.add_parser(name, help=help_text)
        _global_flags(p, suppress=True)
        return p

    p = command("scan", "probe targets for VPN endpoints")
    _scan_flags(p, targets_required=True)
    p.add_argument("--out", type=Path, help="NDJSON output (default: <out-dir>/scan.ndjson)")

    p = command("audit-tls", "collect and classify certificates of TLS-based VPN endpoints")
    p.add_argument("--in", dest="inp", type=Path, required=True, help="scan NDJSON")
    p.add_argument("--protocols", default="openvpn,sstp")
    p.add_argument("--reference-date", type=dt.date.fromisoformat, required=True)
    p.add_argument("--rdns", type=Path, help="CSV ip,domain,source; enables the SNI comparison pass")
    p.add_argument("--timeout", type=float, default=5000.0, help="milliseconds")
    p.add_argument("--out", type=Path)

    p = command("vuln", "suggestion-based TLS downgrade and heartbeat checks")
    p.add_argument("--in", dest="inp", type=Path, required=True)
    p.add_argument("--checks", default=",".join(v.value for v in VulnId))
    p.add_argument("--protocols", default="openvpn,sstp")
    p.add_argument("--timeout", type=float, default=5000.0, help="milliseconds")
    p.add_argument("--out", type=Path)

    p = command("fingerprint", "vendor tables and open-port sweep of detected servers")
    p.add_argument("--in", dest="inp", type=Path, required=True)
    p.add_argument("--ports", type=Path, help="port list file (default: built-in list)")
    p.add_argument("--no-sweep", action="store_true")
    p.add_argument("--top-n", type=int, default=10)
    p.add_argument("--timeout", type=float, default=1000.0, help="milliseconds")
    p.add_argument("--rate", type=float, default=100.0)
    p.add_argument("--out", type=Path, help="heatmap CSV (default: <out-dir>/heatmap.csv)")

    p = command("classify-traffic", "label flows by hitlist, port and domain name")
    p.add_argument("--flows", type=Path, required=True)
    p.add_argument("--hitlist", type=Path, required=True)
    p.add_argument("--dns", type=Path, required=True)
    p.add_argument("--psl", type=Path, required=True)
    p.add_argument("--bucket", default="1h")
    p.add_argument("--out", type=Path, help="summary CSV (default: <out-dir>/traffic.csv)")

    command("report", "render summary.txt from the artifacts in --out-dir")

    p = command("pipeline", "run every stage end to end")
    _scan_flags(p, targets_required=False)
    p.add_argument("--stages", default="scan,web,tls,vuln,fingerprint")
    p.add_argument("--reference-date", type=dt.date.fromisoformat)
    p.add_argument("--web-port", type=int, default=80)
    p.add_argument("--rdns", type=Path)
    p.add_argument("--checks", default=",".join(v.value for v in VulnId))
    p.add_argument("--sweep-ports", type=Path, help="port list file; pass an empty file to skip the sweep")
    p.add_argument("--flows", type=Path)
    p.add_argument("--dns", type=Path)
    p.add_argument("--psl", type=Path)
    p.add_argument("--bucket", default="1h")

    p = command("mocknet", "serve mock VPN endpoints until interrupted")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--profiles", type=Path, help="JSON list of mock profiles")
    group.add_argument("--grid", action="store_true", help="one mock per protocol plus web/silent/malformed hosts")
    p.add_argument("--targets-out", type=Path, help="write the mock addresses as a targets file")
    p.add_argument("--duration", type=float, help="exit after this many seconds")
    return parser


def _fixed(args) -> Optional[dt.datetime]:
    try:
        return fixed_instant(getattr(args, "fixed_time", None))
    except ValueError as exc:
        raise ConfigError(f"bad --fixed-time: {exc}") from None


def _out(args, explicit: Optional[Path], name: str) -> Path:
    path = explicit or (args.out_dir / report.ARTIFACTS[name])
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _require(path: Optional[Path], what: str):
    if path is not None and not path.is_file():
        raise ConfigError(f"{what} not found: {path}")


def _checks(text: str) -> tuple[VulnId, ...]:
    try:
        return tuple(VulnId(c.strip()) for c in text.split(",") if c.strip())
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _tls_protocols(text: str) -> tuple[str, ...]:
    protocols = tuple(p.strip() for p in text.split(",") if p.strip())
    bad = [p for p in protocols if p not in ("openvpn", "sstp")]
    if bad:
        raise ConfigError(f"TLS audit covers openvpn and sstp, not {', '.join(bad)}")
    return protocols


def cmd_scan(args) -> int:
    from .scan import ScanConfig, ScanSummary, load_blocklist, run_sweep, write_ndjson

    _require(args.targets, "targets file")
    _require(args.blocklist, "blocklist file")
    try:
        cfg = ScanConfig(
            targets_source=args.targets, protocols=parse_kinds(args.protocols), rate_limit=args.rate,
            timeout=args.timeout, retries=args.retries, blocklist=load_blocklist(args.blocklist), seed=args.seed,
            ports=parse_port_overrides(args.ports), workers=args.workers, fixed_time=_fixed(args),
        )
        summary = ScanSummary()
        results = list(run_sweep(cfg, summary=summary))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    write_ndjson(results, _out(args, args.out, "scan"))
    print(json.dumps(summary.to_json()))
    return EXIT_OK


def _scan_rows(path: Path) -> list[dict]:
    _require(path, "scan results")
    return report.read_ndjson(path)


def cmd_audit_tls(args) -> int:
    from .pipeline import _rdns_names, _tls_targets
    from .tls.audit import audit_targets

    _require(args.rdns, "rdns file")
    cfg = PipelineConfig(args.out_dir, tls_protocols=_tls_protocols(args.protocols), rdns=args.rdns)
    targets = _tls_targets(cfg, _scan_rows(args.inp))
    run = audit_targets(targets, args.reference_date, _rdns_names(cfg), timeout=args.timeout / 1000.0)
    out = _out(args, args.out, "certs")
    report.write_ndjson(run.rows, out)
    report.write_ndjson(run.failures, out.with_name(report.ARTIFACTS["tls_failures"]))
    if args.rdns:
        report.write_ndjson(run.comparisons, out.with_name(report.ARTIFACTS["sni"]))
    print(json.dumps({"certificates": len(run.rows), "failures": len(run.failures), "sni_pairs": len(run.comparisons)}))
    return EXIT_OK


def cmd_vuln(args) -> int:
    from .pipeline import _tls_targets
    from .tls.vuln import BUILTIN_CHECKS, run_all_checks

    cfg = PipelineConfig(args.out_dir, tls_protocols=_tls_protocols(args.protocols))
    targets = [t for t, _ in _tls_targets(cfg, _scan_rows(args.inp))]
    fixed = _fixed(args)
    kwargs = {"now": lambda: fixed} if fixed else {}
    run = run_all_checks(targets, [BUILTIN_CHECKS[c] for c in _checks(args.checks)], timeout=args.timeout / 1000.0, **kwargs)
    report.write_ndjson((f.to_json() for f in run.findings), _out(args, args.out, "vuln"))
    print(json.dumps(run.matrix))
    return EXIT_OK


def cmd_fingerprint(args) -> int:
    from .pipeline import stage_fingerprint
    from .scan import TokenBucket

    _require(args.ports, "port list")
    rows = _scan_rows(args.inp)
    try:
        ports = load_port_list(args.ports.read_text()) if args.ports else None
    except ValueError as exc:
        raise ConfigError(f"{args.ports}: {exc}") from None
    work = args.out_dir
    work.mkdir(parents=True, exist_ok=True)
    scan_copy = work / report.ARTIFACTS["scan"]
    if scan_copy.resolve() != args.inp.resolve():
        report.write_ndjson(rows, scan_copy)
    cfg = PipelineConfig(
        work, seed=args.seed, timeout_ms=args.timeout, top_n=args.top_n,
        sweep_ports=() if args.no_sweep else ports,
    )
    stage_fingerprint(cfg, TokenBucket(args.rate))
    heatmap = cfg.artifact("heatmap")
    if args.out and heatmap.exists():
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(heatmap.read_text())
    print(cfg.artifact("vendors").read_text(), end="")
    return EXIT_OK


def cmd_classify(args) -> int:
    from .traffic import DnsMapping, Hitlist, PublicSuffixList, classify_flows, read_flows, traffic_report

    for path, what in ((args.flows, "flows"), (args.hitlist, "hitlist"), (args.dns, "dns mapping"), (args.psl, "suffix list")):
        _require(path, f"{what} file")
    try:
        hitlist = Hitlist.load(args.hitlist)
        dns = DnsMapping.load(args.dns).without_synthetic_rdns()
        suffixes = PublicSuffixList.load(args.psl)
        result = traffic_report(classify_flows(read_flows(args.flows), hitlist, dns, suffixes), args.bucket)
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from None
    out = _out(args, args.out, "traffic_csv")
    out.write_text(result.summary_csv())
    out.with_name(report.ARTIFACTS["traffic_series"]).write_text(result.series_csv())
    out.with_name(report.ARTIFACTS["traffic"]).write_text(json.dumps(result.to_json(), indent=2) + "\n")
    print(json.dumps(result.to_json()["methods"]))
    return EXIT_OK


def cmd_report(args) -> int:
    if not args.out_dir.is_dir():
        raise ConfigError(f"output directory not found: {args.out_dir}")
    path = report.write_summary(args.out_dir)
    print(path.read_text(), end="")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    stages = tuple(s.strip() for s in args.stages.split(",") if s.strip())
    if (args.flows or args.dns or args.psl) and "classify" not in stages:
        stages += ("classify",)
    fixed = _fixed(args)
    sweep = None
    if args.sweep_ports:
        _require(args.sweep_ports, "sweep port list")
        sweep = load_port_list(args.sweep_ports.read_text())
    try:
        cfg = PipelineConfig(
            out_dir=args.out_dir, stages=stages, targets=args.targets, blocklist=args.blocklist,
            protocols=parse_kinds(args.protocols), ports=parse_port_overrides(args.ports), rate_limit=args.rate,
            timeout_ms=args.timeout, retries=args.retries, workers=args.workers, seed=args.seed, fixed_time=fixed,
            reference_date=args.reference_date or (fixed.date() if fixed else None), web_port=args.web_port,
            rdns=args.rdns, vuln_checks=_checks(args.checks), sweep_ports=sweep, flows=args.flows, dns=args.dns,
            psl=args.psl, bucket=args.bucket,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    outcome = run_pipeline(cfg)
    if outcome.status == EXIT_CONFIG:
        raise ConfigError(outcome.message)
    if outcome.status == EXIT_STAGE:
        print(f"vpnscope: {outcome.message}", file=sys.stderr)
        return EXIT_STAGE
    print(json.dumps({"stages": outcome.stages_run, "scan": outcome.scan_summary}))
    return EXIT_OK


def cmd_mocknet(args) -> int:
    from .mocknet import load_profiles, spawn_grid, spawn_vpn_grid

    stop = threading.Event()
    if args.grid:
        grid = spawn_vpn_grid(seed=args.seed)
        endpoints, info = grid.endpoints, {"ports": grid.ports, "roles": grid.roles, "expected": grid.expected}
        addresses = sorted(grid.roles.values(), key=lambda a: int(ipaddress.ip_address(a)))
    else:
        _require(args.profiles, "profile file")
        try:
            endpoints = spawn_grid(load_profiles(args.profiles), seed=args.seed)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{args.profiles}: {exc}") from None
        info = {"endpoints": [{"protocol": e.profile.protocol, "address": e.address, "port": e.port} for e in endpoints]}
        addresses = sorted({e.address for e in endpoints}, key=lambda a: int(ipaddress.ip_address(a)))
    if args.targets_out:
        args.targets_out.write_text("".join(f"{a}\n" for a in addresses))
    print(json.dumps(info), flush=True)
    if threading.current_thread() is threading.main_thread():
        signal.signal(signal.SIGTERM, lambda *_: stop.set())
    try:
        stop.wait(args.duration)
    except KeyboardInterrupt:
        pass
    finally:
        for ep in endpoints:
            ep.shutdown()
    return EXIT_OK


__all__ = ["build_parser", "main"]

COMMANDS = {
    "scan": cmd_scan,
    "audit-tls": cmd_audit_tls,
    "vuln": cmd_vuln,
    "fingerprint": cmd_fingerprint,
    "classify-traffic": cmd_classify,
    "report": cmd_report,
    "pipeline": cmd_pipeline,
    "mocknet": cmd_mocknet,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"vpnscope: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any other failure is a stage failure
        log.debug("unhandled", exc_info=True)
        print(f"vpnscope: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
