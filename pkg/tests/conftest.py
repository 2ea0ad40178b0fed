import os
from pathlib import Path

import pytest

from wasmless.executor import Executor
from wasmless.workloads.build import build_guests

ROOT = Path(__file__).resolve().parent.parent
GUEST_DIR = Path(os.environ.get("WASMLESS_GUEST_DIR", ROOT / "build" / "guests"))

_acceptance: dict[str, tuple[str, str]] = {}


@pytest.fixture(scope="session")
def guests():
    """All guests compiled once per session (cached across sessions by source fingerprint)."""
    return build_guests(GUEST_DIR)


@pytest.fixture(scope="session")
def executor():
    ex = Executor()
    yield ex
    ex.close()


@pytest.fixture
def fresh_executor():
    ex = Executor()
    yield ex
    ex.close()


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if not name.startswith("test_criterion_"):
        return
    if report.when == "call" or report.outcome != "passed":
        doc = report.longrepr if report.failed else ""
        prev = _acceptance.get(name)
        if prev is None or prev[0] == "PASS":
            _acceptance[name] = ("PASS" if report.passed else "SKIP" if report.skipped else "FAIL", doc)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")

    def key(name):
        num = name.removeprefix("test_criterion_").split("_")[0]
        return int(num) if num.isdigit() else 99, name

    for name in sorted(_acceptance, key=key):
        status, _ = _acceptance[name]
        terminalreporter.write_line(f"{status}  {name}")
