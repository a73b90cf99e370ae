import pytest

_LINES: list[str] = []


@pytest.fixture
def criterion_line():
    """Record one summary line per acceptance criterion."""

    def record(number: int, passed: bool, detail: str):
        line = f"criterion {number} {'PASS' if passed else 'FAIL'}: {detail}"
        _LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
