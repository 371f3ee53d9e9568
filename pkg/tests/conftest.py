import pytest

from molqed import lookup_molecule


@pytest.fixture(scope="session")
def cabr():
    return lookup_molecule("CaBr")


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
