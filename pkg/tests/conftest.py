from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from vcmqp.synthetic import make_synthetic_corpus  # noqa: E402

_acceptance: dict[str, str] = {}


@pytest.fixture(scope="session")
def synth_corpus(tmp_path_factory) -> Path:
    """Read-only four-image synthetic corpus shared across tests."""
    return make_synthetic_corpus(tmp_path_factory.mktemp("corpus"), n_images=4, seed=0)


def pytest_runtest_logreport(report):
    if "acceptance" not in report.keywords:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _acceptance[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, outcome in sorted(_acceptance.items()):
        name = nodeid.split("::")[-1]
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")
