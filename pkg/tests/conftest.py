import pytest

_CRITERIA = {}


def format_line(number, title, ok, detail):
    return f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {title} [{detail}]"


@pytest.fixture
def criterion():
    """Record one acceptance line, then fail the test if the check failed."""

    def record(number, title, ok, detail):
        line = format_line(number, title, ok, detail)
        _CRITERIA[number] = line
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
