import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

# (number, title, passed, detail) rows filled in by test_acceptance.py
ACCEPTANCE: list[tuple[int, str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(
            f"[{'PASS' if passed else 'FAIL'}] {number:2d}. {title}: {detail}")
