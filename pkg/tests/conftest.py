import pytest

from mimogfm.closedloop import find_equilibrium
from mimogfm.presets import hinf_gains, nominal_disturbance, table1_params, table1_references, traditional_gains


@pytest.fixture(scope="session")
def params():
    return table1_params()


@pytest.fixture(scope="session")
def refs():
    return table1_references()


@pytest.fixture(scope="session")
def dist():
    return nominal_disturbance()


@pytest.fixture(scope="session")
def trad():
    return traditional_gains()


@pytest.fixture(scope="session")
def hinf():
    return hinf_gains()


@pytest.fixture(scope="session", params=["traditional", "hinf"])
def gains(request, trad, hinf):
    return {"traditional": trad, "hinf": hinf}[request.param]


@pytest.fixture(scope="session")
def eq_hinf(refs, dist, hinf, params):
    return find_equilibrium(refs, dist, hinf, params)


ACCEPTANCE = {}


def record(criterion, ok, detail):
    """Store one acceptance verdict for the end-of-run summary."""
    ACCEPTANCE[criterion] = (bool(ok), detail)
    print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
