"""In-process mock endpoints that provide ground truth for integration tests."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .profiles import (
    Behavior,
    MockProfile,
    TlsConfig,
    heartbleed_tls,
    legacy_tls,
    load_profiles,
    modern_tls,
)
from .servers import (
    CaptureSink,
    LoggedPacket,
    MockBindError,
    MockEndpoint,
    spawn,
    spawn_capture_sink,
    spawn_grid,
)

# probe kind -> mock protocol / transport, in the order ports are allocated
GRID_KINDS = {
    "ike": ("ike", "udp"),
    "pptp": ("pptp", "tcp"),
    "openvpn": ("openvpn", "udp"),
    "sstp": ("sstp", "tcp"),
    "web": ("web", "tcp"),
}


@dataclass
class MockGrid:
    endpoints: list[MockEndpoint]
    ports: dict[str, int]
    roles: dict[str, str]  # role -> address
    expected: dict[str, str] = field(default_factory=dict)  # address -> protocol a scan must detect

    def shutdown(self):
        for ep in self.endpoints:
            ep.shutdown()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.shutdown()


def _kind_profile(kind: str, behavior: Behavior, address: str, port: int, **extra) -> MockProfile:
    protocol, transport = GRID_KINDS[kind]
    if kind == "sstp" and "tls_config" not in extra:
        extra["tls_config"] = modern_tls()
    return MockProfile(protocol, behavior=behavior, transport=transport, address=address, port=port, **extra)


def spawn_vpn_grid(prefix: str = "127.0.0", first_host: int = 2, seed: Optional[int] = None) -> MockGrid:
    """One canonical mock per VPN protocol plus a web server, a silent and a malformed host.

    Each role sits on its own loopback address; all roles share one port per protocol so
    a scan can address them through a single per-protocol port override.
    """
    roles = {
        name: f"{prefix}.{first_host + i}"
        for i, name in enumerate(["ike", "pptp", "openvpn", "sstp", "web", "silent", "malformed"])
    }
    ports = {kind: 0 for kind in GRID_KINDS}
    endpoints: list[MockEndpoint] = []

    def add(kind, behavior, address, **extra):
        ep = spawn(_kind_profile(kind, behavior, address, ports[kind], **extra), seed=None if seed is None else seed + len(endpoints))
        ports[kind] = ep.port
        endpoints.append(ep)

    try:
        add("ike", Behavior.CANONICAL, roles["ike"])
        add("pptp", Behavior.CANONICAL, roles["pptp"], vendor_string="MikroTik")
        add("openvpn", Behavior.CANONICAL, roles["openvpn"])
        add("sstp", Behavior.CANONICAL, roles["sstp"])
        add("web", Behavior.CANONICAL, roles["web"])
        endpoints.append(spawn(MockProfile("web", tls_config=modern_tls(), address=roles["web"], port=ports["sstp"])))
        for role, behavior in (("silent", Behavior.SILENT), ("malformed", Behavior.MALFORMED)):
            for kind in ("ike", "pptp", "openvpn", "sstp"):
                add(kind, behavior, roles[role])
    except MockBindError:
        for ep in endpoints:
            ep.shutdown()
        raise
    expected = {roles[p]: p for p in ("ike", "pptp", "openvpn", "sstp")}
    return MockGrid(endpoints, ports, roles, expected)


__all__ = [
    "Behavior",
    "CaptureSink",
    "GRID_KINDS",
    "LoggedPacket",
    "MockBindError",
    "MockEndpoint",
    "MockGrid",
    "MockProfile",
    "TlsConfig",
    "heartbleed_tls",
    "legacy_tls",
    "load_profiles",
    "modern_tls",
    "spawn",
    "spawn_capture_sink",
    "spawn_grid",
    "spawn_vpn_grid",
]
