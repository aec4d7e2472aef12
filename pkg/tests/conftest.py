"""Shared pytest plumbing: the acceptance tests register one verdict line per
criterion and we re-print them as a block at the end of the run, where they
are visible without scrolling through the full test list."""

import pytest

_criterion_lines: list[str] = []


@pytest.fixture(scope="session")
def criterion_log():
    """Append ``[criterion N] PASS/FAIL — detail`` lines here."""
    return _criterion_lines


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _criterion_lines:
        terminalreporter.section("acceptance criteria")
        for line in _criterion_lines:
            terminalreporter.write_line(line)
