import pytest

# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE_LINES, key=lambda c: int(c[1:])):
        terminalreporter.write_line(ACCEPTANCE_LINES[cid])


@pytest.fixture(scope="session")
def acceptance_lines():
    return ACCEPTANCE_LINES
