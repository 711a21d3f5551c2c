import pytest

_RESULTS: dict = {}


@pytest.fixture
def criterion():
    """record(id, passed, note) stores one acceptance line for the terminal summary."""
    def record(cid: str, passed: bool, note: str = ""):
        _RESULTS[cid] = (bool(passed), note)
        return passed
    return record


def _key(cid: str):
    num = "".join(ch for ch in cid if ch.isdigit())
    return int(num or 0), cid


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid in sorted(_RESULTS, key=_key):
        ok, note = _RESULTS[cid]
        tr.write_line(f"criterion {cid}: {'PASS' if ok else 'FAIL'}  {note}")
