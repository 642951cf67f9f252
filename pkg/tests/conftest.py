import pytest
from hypothesis import HealthCheck, settings

from qstail.mgf_solver import SolverConfig, solve_mgf

settings.register_profile("qstail", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("qstail")


@pytest.fixture(scope="session")
def mgf_table():
    return solve_mgf(SolverConfig())


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
