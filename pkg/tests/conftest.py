import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qhpcodes.io import load_fixture, toy_code  # noqa: E402


@pytest.fixture(scope="session")
def toy():
    return toy_code()


@pytest.fixture(scope="session")
def code80():
    return load_fixture("qhp-80-16-4")


@pytest.fixture(scope="session")
def code356():
    return load_fixture("qhp-356-36-6")


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
