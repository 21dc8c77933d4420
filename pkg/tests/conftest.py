import pytest

# criterion number -> (title, passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


@pytest.fixture
def record_criterion():
    def record(number: int, title: str, passed: bool, detail: str) -> None:
        ACCEPTANCE[number] = (title, bool(passed), detail)
        print(f"criterion {number:2d} {'PASS' if passed else 'FAIL'}: {title} ({detail})")

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if passed else 'FAIL'}: {title} ({detail})")
