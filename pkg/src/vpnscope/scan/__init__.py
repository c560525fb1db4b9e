"""Randomized, rate-limited VPN probe sweeps."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Union

from .engine import (
    DEFAULT_KINDS,
    PROBE_KINDS,
    ProbeKind,
    ScanConfig,
    ScanResult,
    ScanSummary,
    WebCheck,
    build_probe,
    config_from_files,
    dispatch_plan,
    parse_kinds,
    parse_port_overrides,
    probe,
    probe_http,
    probe_tcp,
    probe_udp,
    run_sweep,
)
from .ratelimit import TokenBucket
from .targets import (
    TargetFileError,
    TargetSequence,
    is_blocked,
    load_blocklist,
    load_targets,
    parse_networks,
    read_networks,
)


def write_ndjson(results: Iterable[ScanResult], path: Union[str, Path]) -> int:
    """Write results sorted by dispatch position so equal runs give equal files."""
    rows = sorted(results, key=lambda r: r.index)
    with open(path, "w") as fh:
        for r in rows:
            fh.write(json.dumps(r.to_json(), sort_keys=False) + "\n")
    return len(rows)


def read_ndjson(path: Union[str, Path]) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


__all__ = [
    "DEFAULT_KINDS",
    "PROBE_KINDS",
    "ProbeKind",
    "ScanConfig",
    "ScanResult",
    "ScanSummary",
    "TargetFileError",
    "TargetSequence",
    "TokenBucket",
    "WebCheck",
    "build_probe",
    "config_from_files",
    "dispatch_plan",
    "is_blocked",
    "load_blocklist",
    "load_targets",
    "parse_kinds",
    "parse_networks",
    "parse_port_overrides",
    "probe",
    "probe_http",
    "probe_tcp",
    "probe_udp",
    "read_ndjson",
    "read_networks",
    "run_sweep",
    "write_ndjson",
]
