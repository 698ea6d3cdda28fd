import pytest

from gapmap.map_core import make_params, make_partition

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def params():
    return make_params(0.01, 4, 8)


@pytest.fixture(scope="session")
def part(params):
    return make_partition(params)


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
