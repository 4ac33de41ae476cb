"""Shared test plumbing: the acceptance-criteria report.

Acceptance tests record one PASS/FAIL line per criterion via
``record_acceptance``; the lines are echoed immediately (visible with
-s) and replayed in a dedicated section of the terminal summary so a
plain ``pytest -v`` run always shows them.
"""

ACCEPTANCE_LINES = []


def record_acceptance(criterion, name, ok, detail):
    line = (f"[acceptance] criterion {criterion} ({name}): "
            f"{'PASS' if ok else 'FAIL'} — {detail}")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
