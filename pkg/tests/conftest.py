import pytest

from nehari_sp.fields import Grid3
from nehari_sp.potentials import PotentialSet

_ACCEPTANCE: list[str] = []

SINGLE_WELL = dict(V="1 - 0.5*exp(-(x^2+y^2+z^2))", Q=["100"], q=[4.2], K="1",
                   V_inf=1.0, Q_inf=[100.0], K_inf=1.0)
CONSTANTS = dict(V="0.5", Q=["100"], q=[4.2], K="1", V_inf=0.5, Q_inf=[100.0], K_inf=1.0)


@pytest.fixture
def single_well():
    return PotentialSet(**SINGLE_WELL)


@pytest.fixture
def constants():
    return PotentialSet(**CONSTANTS)


@pytest.fixture
def grid32():
    return Grid3(32, 8.0)


@pytest.fixture
def acceptance_line():
    """Record a one-line verdict; printed immediately and again in the terminal summary."""
    def record(number: int, passed: bool, detail: str):
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE.append(line)
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
