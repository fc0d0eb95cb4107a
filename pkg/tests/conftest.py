from pathlib import Path

import pytest

from schedloop.workload import CANONICAL_SIM_CONFIG, canonical_suite

FIXTURES = Path(__file__).parent / "fixtures"

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def suite():
    return canonical_suite()


@pytest.fixture(scope="session")
def sim_config():
    return CANONICAL_SIM_CONFIG

