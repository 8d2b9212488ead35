import warnings

import pytest

from carbonstack import pde
from carbonstack.dynamics import JacobiParams
from carbonstack.scheme import SchemeParams
from carbonstack.stack import StackParams, max_emissions_rate

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def stack():
    return StackParams()


@pytest.fixture(scope="session")
def dyn():
    return JacobiParams()


@pytest.fixture(scope="session")
def e_bound(stack):
    return max_emissions_rate(stack)


def reference_grid(n_d, n_e, n_t, cap=1.17e8):
    st = StackParams()
    return pde.grid_for_caps(n_d, n_e, n_t, cap, max_emissions_rate(st), st.xi_max, 1.0)


@pytest.fixture(scope="session")
def grid2():
    """Second refinement level: 12 x 200 cells, 440 steps."""
    return reference_grid(12, 200, 440)


@pytest.fixture(scope="session")
def grid3():
    return reference_grid(24, 400, 1760)


@pytest.fixture(scope="session")
def scheme2(grid2):
    return SchemeParams(e_max=grid2.e_max)


@pytest.fixture(scope="session")
def alpha2(scheme2, dyn, stack, grid2):
    return pde.solve_single_period(scheme2, dyn, stack, grid2)


def quiet_cfl():
    ctx = warnings.catch_warnings()
    ctx.__enter__()
    warnings.simplefilter("ignore", pde.CflWarning)
    return ctx
