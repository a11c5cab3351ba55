import sys

import numpy as np
import pytest

from vpplan import load_fixture, solve_ccp


@pytest.fixture(scope="session")
def exp_scenario():
    return load_fixture("exponential_rendezvous")


@pytest.fixture(scope="session")
def gauss_scenario():
    return load_fixture("gaussian_los")


@pytest.fixture(scope="session")
def exp_vp(exp_scenario):
    return solve_ccp(exp_scenario, kind="vp")


@pytest.fixture(scope="session")
def exp_cantelli(exp_scenario):
    return solve_ccp(exp_scenario, kind="cantelli")


@pytest.fixture(scope="session")
def gauss_vp(gauss_scenario):
    return solve_ccp(gauss_scenario)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
