"""Byte-volume accounting over classified flows.

All counters are integers so that reports over shards merge exactly.
"""
from __future__ import annotations

import csv
import datetime as dt
import io
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Union

METHODS = ("hitlist", "port", "domain")


def _flags(result) -> dict[str, bool]:
    return {"hitlist": result.by_hitlist, "port": result.by_port, "domain": result.by_domain}


def _combo_key(methods) -> str:
    return "&".join(methods)


ALL_COMBOS = tuple(_combo_key(c) for n in (2, 3) for c in combinations(METHODS, n))


def parse_bucket(text: Union[str, int, float]) -> int:
    """``"1h"``, ``"15m"``, ``"30s"``, ``"1d"`` or a number of seconds."""
    if isinstance(text, (int, float)):
        seconds = int(text)
    else:
        text = text.strip().lower()
        units = {"s": 1, "m": 60, "h": 3600, "d": 86400}
        seconds = int(text[:-1]) * units[text[-1]] if text[-1] in units else int(text)
    if seconds <= 0:
        raise ValueError("bucket must be positive")
    return seconds


@dataclass
class TrafficReport:
    bucket: int = 3600
    total_bytes: int = 0
    flows: int = 0
    method_bytes: Counter = field(default_factory=Counter)
    union_bytes: int = 0
    # bytes labelled by at least the methods in the key (pairs and the triple)
    overlap_bytes: Counter = field(default_factory=Counter)
    # bucket start (epoch seconds) -> {"total" or method: bytes}
    series: dict = field(default_factory=lambda: defaultdict(Counter))

    def add(self, result):
        n = result.flow.bytes
        flags = _flags(result)
        hit = [m for m in METHODS if flags[m]]
        key = int(result.flow.start.timestamp()) // self.bucket * self.bucket
        self.flows += 1
        self.total_bytes += n
        self.series[key]["total"] += n
        for m in hit:
            self.method_bytes[m] += n
            self.series[key][m] += n
        if hit:
            self.union_bytes += n
            self.series[key]["union"] += n
        for size in (2, 3):
            for combo in combinations(hit, size):
                self.overlap_bytes[_combo_key(combo)] += n

    def merge(self, other: "TrafficReport") -> "TrafficReport":
        if other.bucket != self.bucket:
            raise ValueError("cannot merge reports with different buckets")
        merged = TrafficReport(self.bucket)
        for part in (self, other):
            merged.total_bytes += part.total_bytes
            merged.flows += part.flows
            merged.method_bytes.update(part.method_bytes)
            merged.union_bytes += part.union_bytes
            merged.overlap_bytes.update(part.overlap_bytes)
            for key, counts in part.series.items():
                merged.series[key].update(counts)
        return merged

    def _share(self, n: int) -> float:
        return n / self.total_bytes if self.total_bytes else 0.0

    def share(self, method: str) -> float:
        return self._share(self.method_bytes[method])

    @property
    def union_share(self) -> float:
        return self._share(self.union_bytes)

    def overlap_share(self, *methods: str) -> float:
        """Overlap volume relative to all traffic."""
        return self._share(self.overlap_bytes[_combo_key(sorted(methods, key=METHODS.index))])

    def overlap_of_union(self, *methods: str) -> float:
        """Overlap volume relative to traffic any method labelled."""
        n = self.overlap_bytes[_combo_key(sorted(methods, key=METHODS.index))]
        return n / self.union_bytes if self.union_bytes else 0.0

    def to_json(self) -> dict:
        return {
            "bucket_seconds": self.bucket,
            "flows": self.flows,
            "total_bytes": self.total_bytes,
            "methods": {m: {"bytes": self.method_bytes[m], "share": self.share(m)} for m in METHODS},
            "union": {"bytes": self.union_bytes, "share": self.union_share},
            "overlaps": {
                combo: {
                    "bytes": self.overlap_bytes[combo],
                    "share": self._share(self.overlap_bytes[combo]),
                    "of_union": self.overlap_bytes[combo] / self.union_bytes if self.union_bytes else 0.0,
                }
                for combo in ALL_COMBOS
            },
        }

    def series_rows(self) -> list[dict]:
        rows = []
        for key in sorted(self.series):
            counts = self.series[key]
            row = {"bucket_start": dt.datetime.fromtimestamp(key, dt.timezone.utc).isoformat().replace("+00:00", "Z")}
            row.update({c: counts[c] for c in ("total", *METHODS, "union")})
            rows.append(row)
        return rows

    def series_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, ["bucket_start", "total", *METHODS, "union"], lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.series_rows())
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["measure", "bytes", "share_of_total", "share_of_union"])
        for m in METHODS:
            writer.writerow([m, self.method_bytes[m], repr(self.share(m)), ""])
        writer.writerow(["union", self.union_bytes, repr(self.union_share), "1.0" if self.union_bytes else ""])
        for combo in ALL_COMBOS:
            n = self.overlap_bytes[combo]
            writer.writerow([combo, n, repr(self._share(n)), repr(n / self.union_bytes) if self.union_bytes else ""])
        writer.writerow(["total", self.total_bytes, "1.0" if self.total_bytes else "", ""])
        return buf.getvalue()


def traffic_report(results: Iterable, bucket: Union[str, int] = 3600) -> TrafficReport:
    report = TrafficReport(parse_bucket(bucket))
    for r in results:
        report.add(r)
    return report
