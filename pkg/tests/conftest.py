import pytest

# one line per acceptance criterion, filled in by test_acceptance.py
VERDICTS = []


@pytest.fixture
def verdict():
    """Record and print a PASS/FAIL line, then assert it."""
    def record(name, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} {name}: {detail}"
        VERDICTS.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
