"""Shared test hooks: collect acceptance verdict lines and echo them after
the run, outside pytest's output capture."""

VERDICTS: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
