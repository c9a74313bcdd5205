import pytest

from toruslab.torus_maps import ConstructionParams, build_maps


@pytest.fixture(scope="session")
def params2():
    return ConstructionParams(n=2).resolved()


@pytest.fixture(scope="session")
def params3():
    return ConstructionParams(n=3).resolved()


@pytest.fixture(scope="session")
def maps2(params2):
    return build_maps(params2)


@pytest.fixture(scope="session")
def maps3(params3):
    return build_maps(params3)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def verdict():
    """Record one PASS/FAIL line per acceptance criterion and return the flag."""

    def record(number: int, ok: bool, summary: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {summary}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
