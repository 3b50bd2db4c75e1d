import sys

import numpy as np
import pytest

import priomarket as pm


@pytest.fixture
def params():
    return pm.calibration_params()


@pytest.fixture
def cps():
    return pm.calibration_cps()


@pytest.fixture
def cost1():
    return pm.ReciprocalCost(1.0)


@pytest.fixture
def cost2():
    return pm.ReciprocalCost(2.0)


def random_full_scenario(rng):
    """Random market that satisfies both coverage and dual-purchase bounds."""
    while True:
        M = int(rng.integers(3, 8))
        tL = rng.uniform(15, 25)
        d0 = rng.uniform(1, 3)
        F = rng.uniform(0, 2)
        S = rng.uniform(4, 6, M)
        V = d0 + tL + F + S.max() + rng.uniform(1, 5)
        lo = S.max() / (V - d0 - 0.5 * (S.max() + tL))
        hi = S.min() / (V - tL)
        if not 0 < lo < hi < 1:
            continue
        theta = rng.uniform(lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo))
        params = pm.MarketParams(V, tL * (M - 1), theta, rng.uniform(0, 1), rng.uniform(1, 10), F, M, d0)
        return params, pm.make_cps(list(S), list(rng.uniform(1, 4, M)))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
