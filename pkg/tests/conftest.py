import pytest

from capalloc.model import Instance

_ACCEPTANCE = []


@pytest.fixture
def acceptance_log():
    """Collects one PASS/FAIL line per acceptance criterion for the summary."""
    def log(criterion, passed, detail=""):
        line = f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return passed
    return log


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)


@pytest.fixture
def two_by_two():
    return Instance.build([4, 4], [[1, 2], [3, 4]])


@pytest.fixture
def line_instance():
    return Instance.build([2, 2], [[1, 2]])
