"""Shared pytest hooks.

The acceptance suite records one summary line per criterion; this hook prints
them in a dedicated section after the run so they stay visible under pytest's
output capture.
"""

import sys


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "REPORT_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
