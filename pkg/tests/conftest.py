import pytest

from cramer_excursions.rng import Stream

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def stream():
    return Stream(20261014)


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
