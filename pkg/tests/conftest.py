"""Collects the one-line acceptance verdicts and prints them after the run."""

ACCEPTANCE_LINES = {}


def record_acceptance(number, title, passed, detail):
    ACCEPTANCE_LINES[(number, title)] = f"criterion {number:2d} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
    print(ACCEPTANCE_LINES[(number, title)])


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
