import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

import oracles  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if not oracles.ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(oracles.ACCEPTANCE_LINES):
        terminalreporter.write_line(oracles.ACCEPTANCE_LINES[key])
