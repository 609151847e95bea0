import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

os.environ.setdefault("ORDINAL_ITR_THREADS", "1")

# one line per acceptance criterion, echoed after the test summary so the
# gate's outcome is visible even with output capture on
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
