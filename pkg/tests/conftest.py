import pytest

ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def record_criterion():
    """Store and print one PASS/FAIL line for an acceptance criterion."""

    def record(number: int, title: str, passed: bool, detail: str):
        line = f"criterion {number} {'PASS' if passed else 'FAIL'}: {title} | {detail}"
        ACCEPTANCE[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
