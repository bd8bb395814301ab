import pytest

from specshift import RngStream, make_quartet, worked_example_quartet

#: One "PASS/FAIL criterion ..." line per acceptance criterion, echoed in
#: the terminal summary so the verdicts survive pytest's output capture.
CRITERION_LINES = []


def record_criterion(number: int, name: str, ok: bool, detail: str) -> None:
    line = (f"{'PASS' if ok else 'FAIL'} criterion {number:02d} "
            f"[{name}]: {detail}")
    CRITERION_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERION_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def worked_quartet():
    return worked_example_quartet()


@pytest.fixture
def quartet_v4():
    return make_quartet(4, 3, rng=RngStream(42, 0))


@pytest.fixture
def unmatched_v4():
    return make_quartet(4, 3, matched=False, rng=RngStream(42, 1))
