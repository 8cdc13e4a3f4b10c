import pytest

_RESULTS = []


@pytest.fixture
def criterion():
    """Record one acceptance outcome; the terminal summary lists every recorded line."""

    def record(name, passed, detail):
        line = f"CRITERION {name}: {'PASS' if passed else 'FAIL'}  {detail}"
        _RESULTS.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in _RESULTS:
        terminalreporter.write_line(line)
