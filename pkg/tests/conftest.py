import pytest

_LINES = {}


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion; parts are and-ed together."""

    def _report(criterion, ok, detail):
        prev_ok, prev = _LINES.get(criterion, (True, []))
        _LINES[criterion] = (prev_ok and bool(ok), prev + [detail])
        print(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_LINES):
        ok, parts = _LINES[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: " + "; ".join(parts))
