import pytest

# Filled by test_acceptance; one line per criterion, printed after the run.
CRITERIA: dict[int, str] = {}


@pytest.fixture(scope="session")
def report():
    def record(number: int, title: str, ok: bool, detail: str):
        CRITERIA[number] = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        print(CRITERIA[number])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[n])
