import numpy as np
import pytest

import priomarket as pm
from priomarket import oracle as orc

from .conftest import random_full_scenario


def test_grid_precondition(params, cps):
    with pytest.raises(pm.MarketError):
        orc.simulate_users(params, cps, None, 10000)
    with pytest.raises(pm.MarketError):
        orc.simulate_users(params, cps, None, 5001)


def test_calibration_masses(params, cps):
    sim = orc.simulate_users(params, cps, None, 100001)
    assert sim.masses[3][0] == pytest.approx(0.296, abs=1e-3)
    assert sim.masses[3][1] == pytest.approx(0.2, abs=1e-3)
    assert sim.opt_out == 0


def test_reflection_symmetry():
    p = pm.calibration_params(M=3, t=250)
    c = pm.calibration_cps(M=3)
    m = orc.simulate_users(p, c, None, 10001).masses
    assert abs(m.n[0] - m.n[2]) <= 2 / 10001
    assert abs(m.n1[0] - m.n1[2]) <= 2 / 10001


def test_prioritization_difference(params, cps):
    ds = 4.5471185
    a = orc.simulate_users(params, cps, None)
    b = orc.simulate_users(params, cps, [6, 6, ds, 6, 6, 6])
    assert b.masses.n[2] - a.masses.n[2] == pytest.approx(0.0058116, abs=1e-3)


def test_compare_identical_inputs(params, cps):
    m = pm.masses_default(params, cps)
    rep = orc.compare_masses(m, m)
    assert rep.passed and rep.max_error == 0
    with pytest.raises(pm.MarketError):
        orc.compare_masses(m, pm.masses_default(pm.calibration_params(M=3), pm.calibration_cps(M=3)))


def test_closed_form_breaks_without_coverage(cps):
    p = pm.calibration_params(V=60)
    assert pm.validate_assumptions(p, cps).regime is not pm.Regime.FULL
    with pytest.raises(pm.NegativeMassError):
        pm.masses_multi(p, cps)
    m = pm.masses_multi(p, cps, check_negative=False)
    rep = orc.oracle_report(p, cps, m, None, 100001)
    assert not rep.passed


def test_adjacency(params, cps):
    assert orc.adjacency_check(params, cps, None, 100001) == 0
    assert orc.adjacency_check(pm.calibration_params(V=200), cps, None, 100001) == 0


def test_adversarial_adjacency_is_recorded():
    p = pm.calibration_params()
    c = pm.make_cps([40, 40, 0, 40, 40, 40], 2.27)
    v = orc.adjacency_check(p, c, [6, 6, 0.1, 6, 6, 6], 20001)
    assert v >= 0


def test_random_full_battery():
    rng = np.random.default_rng(11)
    for _ in range(50):
        params, cps = random_full_scenario(rng)
        assert orc.adjacency_check(params, cps, None, 20001) == 0


def test_oracle_converges():
    rng = np.random.default_rng(3)
    params, cps = random_full_scenario(rng)
    m = pm.masses_multi(params, cps)
    e1 = orc.oracle_report(params, cps, m, None, 10001).max_error
    e2 = orc.oracle_report(params, cps, m, None, 20001).max_error
    assert e2 <= e1 + 2 / 10001


def test_oracle_revenue_drop_matches_closed_form(params, cps):
    ds = 4.5471185
    post = [6, 6, ds, 6, 6, 6]
    a = orc.simulate_users(params, cps, None).masses
    b = orc.simulate_users(params, cps, post).masses
    drop = pm.cp_revenue(params, cps[1], b[2]) - pm.cp_revenue(params, cps[1], a[2])
    assert drop == pytest.approx(-5 * 2.27 * 0.5 * (6 - ds) / 1000, abs=1e-2)
