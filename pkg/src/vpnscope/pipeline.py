"""End-to-end run: scan, web exclusion, certificate audit, TLS checks, fingerprinting, traffic labelling.

Each stage reads the previous stage's artifact from the output directory, so any
suffix of the pipeline can be rerun on its own.
"""
from __future__ import annotations

import datetime as dt
import ipaddress
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from . import report
from .codec.base import TransportTarget
from .fingerprint import DEFAULT_PORTS, port_heatmap, sweep_hosts, vendor_distribution
from .scan import DEFAULT_KINDS, ScanConfig, ScanSummary, TokenBucket, load_blocklist, probe_http, run_sweep, write_ndjson
from .scan.targets import TargetFileError
from .tls.audit import audit_targets
from .tls.vuln import BUILTIN_CHECKS, VulnId, run_all_checks
from .traffic import (
    DnsMapping,
    DnsSource,
    Hitlist,
    PublicSuffixList,
    build_hitlist,
    classify_flows,
    read_flows,
    traffic_report,
)

log = logging.getLogger(__name__)

STAGES = ("scan", "web", "tls", "vuln", "fingerprint", "classify")
TLS_PROTOCOLS = ("openvpn", "sstp")
EXIT_OK, EXIT_CONFIG, EXIT_STAGE = 0, 1, 2


class PipelineConfigError(Exception):
    pass


class StageFailure(Exception):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage} failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineConfig:
    out_dir: Path
    stages: tuple[str, ...] = ("scan", "web", "tls", "vuln", "fingerprint")
    targets: Optional[Path] = None
    blocklist: Optional[Path] = None
    protocols: tuple[str, ...] = DEFAULT_KINDS
    ports: dict[str, int] = field(default_factory=dict)
    rate_limit: float = 100.0
    timeout_ms: float = 1000.0
    retries: Optional[int] = None
    workers: int = 32
    seed: int = 0
    fixed_time: Optional[dt.datetime] = None
    reference_date: Optional[dt.date] = None
    web_port: int = 80
    tls_protocols: tuple[str, ...] = TLS_PROTOCOLS
    rdns: Optional[Path] = None
    vuln_checks: tuple[VulnId, ...] = tuple(VulnId)
    sweep_ports: Optional[Sequence[int]] = None  # None: DEFAULT_PORTS; empty: skip the sweep
    top_n: int = 10
    flows: Optional[Path] = None
    dns: Optional[Path] = None
    psl: Optional[Path] = None
    bucket: str = "1h"

    def validate(self):
        unknown = set(self.stages) - set(STAGES)
        if unknown:
            raise PipelineConfigError(f"unknown stage(s): {', '.join(sorted(unknown))}")
        if "scan" in self.stages:
            if self.targets is None:
                raise PipelineConfigError("scan stage needs a targets file")
            if not Path(self.targets).is_file():
                raise PipelineConfigError(f"targets file not found: {self.targets}")
        elif any(s in self.stages for s in ("web", "tls", "vuln", "fingerprint")):
            scan_file = Path(self.out_dir) / report.ARTIFACTS["scan"]
            if not scan_file.is_file():
                raise PipelineConfigError(f"no scan results to continue from: {scan_file}")
        for name in ("blocklist", "rdns", "flows", "dns", "psl"):
            path = getattr(self, name)
            if path is not None and not Path(path).is_file():
                raise PipelineConfigError(f"{name} file not found: {path}")
        if "tls" in self.stages and self.reference_date is None:
            raise PipelineConfigError("certificate audit needs --reference-date (or --fixed-time)")
        if "classify" in self.stages:
            missing = [n for n in ("flows", "dns", "psl") if getattr(self, n) is None]
            if missing:
                raise PipelineConfigError(f"classify stage needs: {', '.join(missing)}")
            hitlist = Path(self.out_dir) / report.ARTIFACTS["hitlist"]
            if "web" not in self.stages and not hitlist.is_file():
                raise PipelineConfigError(f"no hitlist to classify with: {hitlist}")
        try:
            Path(self.out_dir).mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise PipelineConfigError(f"cannot create output directory {self.out_dir}: {exc}") from None

    def artifact(self, name: str) -> Path:
        return Path(self.out_dir) / report.ARTIFACTS[name]

    def scan_config(self) -> ScanConfig:
        return ScanConfig(
            targets_source=self.targets,
            protocols=self.protocols,
            rate_limit=self.rate_limit,
            timeout=self.timeout_ms,
            retries=self.retries,
            blocklist=load_blocklist(self.blocklist),
            seed=self.seed,
            ports=self.ports,
            workers=self.workers,
            fixed_time=self.fixed_time,
        )

    def now(self) -> dt.datetime:
        return self.fixed_time or dt.datetime.now(dt.timezone.utc)


@dataclass
class PipelineOutcome:
    status: int
    stages_run: list[str] = field(default_factory=list)
    failed_stage: Optional[str] = None
    message: str = ""
    scan_summary: Optional[dict] = None


def _ip_key(text: str):
    ip = ipaddress.ip_address(text)
    return (ip.version, int(ip))


def _detected(rows: list[dict]) -> list[dict]:
    return [r for r in rows if r["detected"]]


def _tls_targets(cfg: PipelineConfig, scan_rows: list[dict]) -> list[tuple[TransportTarget, str]]:
    seen = {}
    for r in _detected(scan_rows):
        if r["protocol"] in cfg.tls_protocols and r["transport"] == "tcp":
            seen[(r["target_ip"], r["port"])] = r["protocol"]
    keys = sorted(seen, key=lambda k: (_ip_key(k[0]), k[1]))
    return [(TransportTarget(ip, "tcp", port), seen[(ip, port)]) for ip, port in keys]


def stage_scan(cfg: PipelineConfig, limiter: TokenBucket) -> dict:
    summary = ScanSummary()
    results = list(run_sweep(cfg.scan_config(), summary=summary, limiter=limiter))
    write_ndjson(results, cfg.artifact("scan"))
    return summary.to_json()


def stage_web(cfg: PipelineConfig, limiter: TokenBucket):
    rows = report.read_ndjson(cfg.artifact("scan"))
    scan_cfg = cfg.scan_config()
    addresses = sorted({r["target_ip"] for r in _detected(rows)}, key=_ip_key)
    checks = [probe_http(ipaddress.ip_address(a), cfg.web_port, scan_cfg, limiter) for a in addresses]
    report.write_ndjson((c.to_json() for c in checks), cfg.artifact("web"))
    build_hitlist(rows, [c.address for c in checks if c.responded]).save(cfg.artifact("hitlist"))


def _rdns_names(cfg: PipelineConfig) -> dict:
    if cfg.rdns is None:
        return {}
    mapping = DnsMapping.load(cfg.rdns)
    names = {}
    for ip in mapping.ips():
        found = mapping.domains(ip, DnsSource.RDNS) or mapping.domains(ip)
        if found:
            names[ip] = sorted(found)
    return names


def stage_tls(cfg: PipelineConfig):
    targets = _tls_targets(cfg, report.read_ndjson(cfg.artifact("scan")))
    run = audit_targets(targets, cfg.reference_date, _rdns_names(cfg), timeout=cfg.timeout_ms / 1000.0, workers=cfg.workers)
    report.write_ndjson(run.rows, cfg.artifact("certs"))
    report.write_ndjson(run.failures, cfg.artifact("tls_failures"))
    if cfg.rdns is not None:
        report.write_ndjson(run.comparisons, cfg.artifact("sni"))


def stage_vuln(cfg: PipelineConfig):
    targets = _tls_targets(cfg, report.read_ndjson(cfg.artifact("scan")))
    specs = [BUILTIN_CHECKS[v] for v in cfg.vuln_checks]
    run = run_all_checks(
        [t for t, _ in targets], specs, timeout=cfg.timeout_ms / 1000.0, workers=cfg.workers, now=cfg.now
    )
    report.write_ndjson((f.to_json() for f in run.findings), cfg.artifact("vuln"))


def stage_fingerprint(cfg: PipelineConfig, limiter: TokenBucket):
    rows = report.read_ndjson(cfg.artifact("scan"))
    vendors = {p: vendor_distribution(rows, p, cfg.top_n).to_json() for p in ("pptp", "sstp")}
    cfg.artifact("vendors").write_text(json.dumps(vendors, indent=2) + "\n")

    ports = DEFAULT_PORTS if cfg.sweep_ports is None else tuple(cfg.sweep_ports)
    if not ports:
        return
    protocols_of: dict[str, set] = {}
    for r in _detected(rows):
        protocols_of.setdefault(r["target_ip"], set()).add(r["protocol"])
    sweeps = sweep_hosts(
        protocols_of, ports, timeout=cfg.timeout_ms / 1000.0, seed=cfg.seed, workers=cfg.workers, limiter=limiter
    )
    by_protocol: dict[str, list] = {}
    sweep_rows = []
    for s in sweeps:
        found = sorted(protocols_of[str(s.target)])
        for p in found:
            by_protocol.setdefault(p, []).append(s)
        sweep_rows.append({
            "target_ip": str(s.target),
            "protocols": found,
            "open_ports": sorted(s.open_ports),
            "scanned_ports": list(s.scanned_ports),
        })
    report.write_ndjson(sweep_rows, cfg.artifact("ports"))
    cfg.artifact("heatmap").write_text(port_heatmap(by_protocol, sorted(set(ports))).to_csv())


def stage_classify(cfg: PipelineConfig):
    hitlist = Hitlist.load(cfg.artifact("hitlist"))
    dns = DnsMapping.load(cfg.dns).without_synthetic_rdns()
    suffixes = PublicSuffixList.load(cfg.psl)
    result = traffic_report(classify_flows(read_flows(cfg.flows), hitlist, dns, suffixes), cfg.bucket)
    cfg.artifact("traffic").write_text(json.dumps(result.to_json(), indent=2) + "\n")
    cfg.artifact("traffic_csv").write_text(result.summary_csv())
    cfg.artifact("traffic_series").write_text(result.series_csv())


def run_pipeline(cfg: PipelineConfig) -> PipelineOutcome:
    """Run the enabled stages in order; a failing stage stops the run but keeps earlier artifacts."""
    try:
        cfg.validate()
    except (PipelineConfigError, TargetFileError, ValueError) as exc:
        return PipelineOutcome(EXIT_CONFIG, message=str(exc))

    limiter = TokenBucket(cfg.rate_limit)
    outcome = PipelineOutcome(EXIT_OK)
    runners = {
        "scan": lambda: stage_scan(cfg, limiter),
        "web": lambda: stage_web(cfg, limiter),
        "tls": lambda: stage_tls(cfg),
        "vuln": lambda: stage_vuln(cfg),
        "fingerprint": lambda: stage_fingerprint(cfg, limiter),
        "classify": lambda: stage_classify(cfg),
    }
    try:
        for stage in STAGES:
            if stage not in cfg.stages:
                continue
            log.info("stage %s", stage)
            try:
                value = runners[stage]()
            except TargetFileError as exc:
                # malformed targets only surface once the file is read
                raise PipelineConfigError(str(exc)) from None
            except Exception as exc:
                raise StageFailure(stage, exc) from exc
            if stage == "scan":
                outcome.scan_summary = value
            outcome.stages_run.append(stage)
        report.write_summary(cfg.out_dir)
    except PipelineConfigError as exc:
        return PipelineOutcome(EXIT_CONFIG, outcome.stages_run, message=str(exc))
    except StageFailure as exc:
        log.error("%s", exc)
        report.write_summary(cfg.out_dir)
        return PipelineOutcome(EXIT_STAGE, outcome.stages_run, exc.stage, str(exc), outcome.scan_summary)
    return outcome


def fixed_instant(text: Optional[str]) -> Optional[dt.datetime]:
    if text is None:
        return None
    value = dt.datetime.fromisoformat(text.replace("Z", "+00:00"))
    return value if value.tzinfo else value.replace(tzinfo=dt.timezone.utc)


__all__ = [
    "EXIT_CONFIG",
    "EXIT_OK",
    "EXIT_STAGE",
    "PipelineConfig",
    "PipelineConfigError",
    "PipelineOutcome",
    "STAGES",
    "StageFailure",
    "fixed_instant",
    "run_pipeline",
]
