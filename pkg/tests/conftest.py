import pytest

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def report():
    """Record one summary line per acceptance criterion."""

    def _report(number: int, title: str, checks: dict) -> bool:
        passed = all(ok for ok, _ in checks.values())
        detail = "; ".join(f"{name}={value} {'ok' if ok else 'FAIL'}" for name, (ok, value) in checks.items())
        line = f"criterion {number} {'PASS' if passed else 'FAIL'} | {title} | {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
