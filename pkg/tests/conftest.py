import pytest

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE_RESULTS: dict = {}


@pytest.fixture
def report_criterion(capsys):
    def report(number: int, name: str, passed: bool, detail: str) -> None:
        line = f"CRITERION {number:2d} {'PASS' if passed else 'FAIL'}  {name}: {detail}"
        ACCEPTANCE_RESULTS[number] = line
        with capsys.disabled():
            print("\n" + line)

    return report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(ACCEPTANCE_RESULTS[number])
