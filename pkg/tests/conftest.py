import pytest

_ACCEPTANCE = []


@pytest.fixture
def announce():
    """Record one acceptance line, then assert it passed."""

    def _announce(n, ok, text):
        _ACCEPTANCE.append((n, f"[ACCEPT {n}] {'PASS' if ok else 'FAIL'} {text}"))
        assert ok, text

    return _announce


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE):
        terminalreporter.write_line(line)
