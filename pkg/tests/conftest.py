import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from frictionhb import dti
from frictionhb.model import Table1Params, build_two_dof
from frictionhb.scenarios import prestress

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ALPHA45 = math.pi / 4
ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def report(request):
    """Print one PASS/FAIL line per acceptance criterion and keep it for the summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def emit(criterion, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
        print(line)
        lines.append(line)
        return ok

    return emit


@pytest.fixture(scope="session")
def params():
    return Table1Params()


@pytest.fixture(scope="session")
def model0(params):
    return build_two_dof(params, 0.0, 24.0)


@pytest.fixture(scope="session")
def model45(params):
    return build_two_dof(params, ALPHA45, params.F_pl / 84.0)


@pytest.fixture(scope="session")
def u1_45(params):
    return prestress(params, ALPHA45, dti.U1)


@pytest.fixture(scope="session")
def u2_45(params):
    return prestress(params, ALPHA45, dti.U2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
