import pytest

from support import CRITERIA
from vemspectra import experiments as ex


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(CRITERIA, key=lambda c: int(c.split()[-1])):
        ok, detail = CRITERIA[cid]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {cid}: {detail}")


@pytest.fixture(scope="session")
def vessel_runs():
    """The three refinement strategies on the vessel, up to 25k DOFs."""
    cfg = ex.preset("test2-vessel")
    return {r: ex.run_adaptive(cfg, r) for r in cfg.refinement}


@pytest.fixture(scope="session")
def test1_trapezoid():
    return ex.run_test1(ex.preset("test1-trapezoid"))


@pytest.fixture(scope="session")
def test1_hexagon():
    return ex.run_test1(ex.preset("test1-hexagon"))
