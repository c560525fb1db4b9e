"""VPN hitlist construction and flow labelling by hitlist, port and domain name."""
from .classify import (
    VPN_PORTS,
    ClassificationResult,
    DnsMapping,
    DnsSource,
    FlowRecord,
    Hitlist,
    build_hitlist,
    classify_domain_based,
    classify_flows,
    classify_port_based,
    domain_is_vpn,
    read_flows,
    write_flows,
)
from .enrich import PrefixTable, enrich_prefix, rank_rdns_domains
from .psl import PublicSuffixList, normalize_domain
from .rdns import filter_rdns_synthetic
from .report import METHODS, TrafficReport, parse_bucket, traffic_report

__all__ = [
    "METHODS",
    "VPN_PORTS",
    "ClassificationResult",
    "DnsMapping",
    "DnsSource",
    "FlowRecord",
    "Hitlist",
    "PrefixTable",
    "PublicSuffixList",
    "TrafficReport",
    "build_hitlist",
    "classify_domain_based",
    "classify_flows",
    "classify_port_based",
    "domain_is_vpn",
    "enrich_prefix",
    "filter_rdns_synthetic",
    "normalize_domain",
    "parse_bucket",
    "rank_rdns_domains",
    "read_flows",
    "traffic_report",
    "write_flows",
]
