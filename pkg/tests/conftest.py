from __future__ import annotations

import random
from pathlib import Path

import pytest

from vpnscope.codec import load_hex
from vpnscope.mocknet import spawn_vpn_grid

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
FIXTURE_SEED = 7  # seed the fixture generator used for every probe


def fixture_bytes(*parts: str) -> bytes:
    return load_hex(FIXTURES.joinpath(*parts))


def fixture_rng() -> random.Random:
    return random.Random(FIXTURE_SEED)


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="module")
def grid():
    with spawn_vpn_grid(seed=5) as g:
        yield g


def grid_pipeline_args(grid, out_dir: Path, targets: Path, *extra: str) -> list[str]:
    targets.write_text("".join(f"{a}\n" for a in sorted(grid.roles.values())))
    ports = ",".join(f"{k}={grid.ports[k]}" for k in ("ike", "pptp", "openvpn", "sstp"))
    return [
        "pipeline", "--targets", str(targets), "--ports", ports, "--web-port", str(grid.ports["web"]),
        "--out-dir", str(out_dir), "--rate", "500", "--timeout", "500", *extra,
    ]


# -- acceptance summary -------------------------------------------------------------

_CRITERIA: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1][len("test_"):]
        detail = dict(report.user_properties).get("detail", "")
        _CRITERIA[name] = ("PASS" if report.outcome == "passed" else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA):
        status, detail = _CRITERIA[name]
        terminalreporter.write_line(f"{status} {name}" + (f": {detail}" if detail else ""))
