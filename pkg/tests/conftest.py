"""Shared fixtures; acceptance results are echoed in the terminal summary."""

import pytest

_ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Recorder ``record(criterion, passed, detail)`` for acceptance checks."""

    def record(criterion: int, passed: bool, detail: str):
        prev = _ACCEPTANCE.get(criterion)
        ok = bool(passed) and (prev is None or prev[0])
        text = detail if prev is None else f"{prev[1]}; {detail}"
        _ACCEPTANCE[criterion] = (ok, text)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        ok, text = _ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {text}")
