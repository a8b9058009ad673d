import contextlib

import pytest

_VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Context manager that records a PASS/FAIL line for an acceptance criterion."""

    @contextlib.contextmanager
    def record(number: int, title: str):
        try:
            yield
        except BaseException:
            _VERDICTS.append(f"FAIL  criterion {number:2d}: {title}")
            print(_VERDICTS[-1])
            raise
        _VERDICTS.append(f"PASS  criterion {number:2d}: {title}")
        print(_VERDICTS[-1])

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
