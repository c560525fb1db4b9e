"""Spin up the mock grid, run the full pipeline against it and print the rendered summary.

The grid holds one canonical server per VPN protocol plus a web server, a host that never
answers and a host that answers with garbage. Only the four canonical servers should be found.

Run: python3 demos/scan_mock_grid.py [out_dir]
"""
import sys
import tempfile
import time
from pathlib import Path

from vpnscope import cli
from vpnscope.mocknet import spawn_vpn_grid

out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="vpnscope-"))
out_dir.mkdir(parents=True, exist_ok=True)

with spawn_vpn_grid(seed=1) as grid:
    for role, address in grid.roles.items():
        print(f"{role:10s} {address}")
    targets = out_dir / "targets.txt"
    targets.write_text("".join(f"{a}\n" for a in sorted(grid.roles.values())))
    ports = ",".join(f"{k}={grid.ports[k]}" for k in ("ike", "pptp", "openvpn", "sstp"))
    start = time.monotonic()
    code = cli.main([
        "pipeline", "--targets", str(targets), "--ports", ports, "--web-port", str(grid.ports["web"]),
        "--rate", "500", "--timeout", "500", "--seed", "42", "--fixed-time", "--out-dir", str(out_dir),
    ])
    print(f"exit {code} after {time.monotonic() - start:.2f}s, artifacts in {out_dir}\n")

print((out_dir / "summary.txt").read_text())
