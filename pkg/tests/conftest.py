import sys

import pytest

from mftrace import SelfSimilarMeasure, validate_ifs

from oracles import CANTOR, P_A, P_B, P_C, SYS_C


@pytest.fixture(scope="session")
def cantor():
    return validate_ifs(CANTOR)


@pytest.fixture(scope="session")
def sys_c():
    return validate_ifs(SYS_C)


@pytest.fixture(scope="session")
def mu_a(cantor):
    return SelfSimilarMeasure(cantor, P_A)


@pytest.fixture(scope="session")
def mu_b(cantor):
    return SelfSimilarMeasure(cantor, P_B)


@pytest.fixture(scope="session")
def mu_c(sys_c):
    return SelfSimilarMeasure(sys_c, P_C)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.report_lines():
        terminalreporter.write_line(line)
