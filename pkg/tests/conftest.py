import pytest

_VERDICTS: list[str] = []


@pytest.fixture(scope="session")
def verdict():
    """Record one pass/fail line per acceptance criterion, then assert it."""

    def record(label: str, ok: bool, detail: str = "") -> None:
        line = f"{'PASS' if ok else 'FAIL'}  {label}  {detail}".rstrip()
        _VERDICTS.append(line)
        print(line)
        assert ok, f"{label}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
