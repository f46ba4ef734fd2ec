import pytest

_RESULTS: list[tuple[str, str, str]] = []


@pytest.fixture
def criterion():
    """Record one acceptance line: criterion(name, passed, detail)."""

    def record(name: str, passed: bool | None, detail: str) -> None:
        status = "ADVISORY" if passed is None else ("PASS" if passed else "FAIL")
        _RESULTS.append((name, status, detail))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, detail in _RESULTS:
        terminalreporter.write_line(f"{status:<8} {name}: {detail}")
