import pytest

_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    """Record one acceptance line: ``acceptance(id, passed, detail)``."""
    def record(cid, passed, detail=""):
        _ACCEPTANCE.append((cid, bool(passed), detail))
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid, passed, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {cid}: {detail}")
