import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def record_criterion():
    """Record one acceptance line; the test still asserts on ``ok``."""
    def record(number: int, ok: bool, detail: str):
        ACCEPTANCE_LINES.append((number, f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"))
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
