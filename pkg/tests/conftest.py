import pytest

_criterion_lines = []


@pytest.fixture
def record_criterion():
    """Collects one PASS/FAIL line per acceptance criterion and asserts it."""

    def rec(num, passed, detail):
        status = "PASS" if passed else "FAIL"
        _criterion_lines.append(f"criterion {num:2d}: {status} - {detail}")
        assert passed, f"criterion {num}: {detail}"

    return rec


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _criterion_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_criterion_lines):
            terminalreporter.write_line(line)
