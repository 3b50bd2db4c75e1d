import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import priomarket as pm
from priomarket import equilibrium as eq


def d_star_c1():
    # root of A + (lam c / t)(1/d0 - R/d^2) = 0 with R = V - S/theta
    A = (10 + 0.5 * 1.5 * 5 * 2.27) / 500
    return math.sqrt(80 / (A * 500 / 5 + 1 / 6))


def test_default_masses(params, cps):
    m = pm.masses_default(params, cps)
    assert m[3] == pytest.approx((0.296, 0.2, 0.096), abs=1e-15)
    assert m[1] == pytest.approx((0.148, 0.1, 0.048), abs=1e-15)
    assert m.n1.sum() == pytest.approx(1.0, abs=1e-15)
    assert m.dual_share == pytest.approx(0.48, abs=1e-12)


def test_strict_mode_refuses_partial_coverage(params, cps):
    with pytest.raises(pm.RegimeError):
        pm.masses_multi(params, cps, strict=True)


def test_prioritizing_mid_cp(params, cps):
    ds = d_star_c1()
    post = pm.DelayProfile.default(params).replace(3, ds)
    D = pm.prioritization_deltas(params, cps, None, post)
    dn3, dn1_3, dn2_3, _ = D[3]
    assert dn3 == pytest.approx(2 * (6 - ds) / 500, abs=1e-15)
    assert dn1_3 == pytest.approx((6 - ds) / 500, abs=1e-15)
    dn2, dn1_2, dn2_2, dR2 = D[2]
    assert abs(dn2) <= 1e-12
    assert dn1_2 == pytest.approx(-(6 - ds) / 1000, abs=1e-15)
    assert dn2_2 == pytest.approx(-dn1_2, abs=1e-15)
    assert dR2 == pytest.approx(-5 * 2.27 * 0.5 * (6 - ds) / 1000, abs=1e-12)
    # competitors two steps away are untouched
    assert D[1] == pytest.approx((0, 0, 0, 0), abs=1e-15)


def test_prioritizing_end_cp_halves_the_gain(params, cps):
    post = pm.DelayProfile.default(params).replace(1, 5.0)
    D = pm.prioritization_deltas(params, cps, None, post)
    assert D[1][0] == pytest.approx(1.0 / 500)
    assert D[1][1] == pytest.approx(0.5 / 500)
    assert D[2][1] == pytest.approx(-0.5 / 500)


def test_negative_mass_is_reported():
    p = pm.calibration_params(V=30)
    with pytest.raises(eq.NegativeMassError) as err:
        pm.masses_multi(p, pm.calibration_cps())
    assert err.value.j == 1


def test_multi_refuses_theta_zero(cps):
    with pytest.raises(pm.RegimeError):
        pm.masses_multi(pm.calibration_params(theta=0.0), cps)


def test_single_purchase_masses(cps):
    p0 = pm.calibration_params(theta=0.0)
    m = pm.masses_single(p0, cps)
    assert m.n.sum() == pytest.approx(1.0)
    assert np.all(m.n2 == 0)
    post = pm.DelayProfile.default(p0).replace(3, 5.0)
    m2 = pm.masses_single(p0, cps, post)
    assert m2.n[2] - m.n[2] == pytest.approx(1.0 / 500)
    assert m2.n[1] - m.n[1] == pytest.approx(-0.5 / 500)


def test_single_purchase_needs_its_regime(params, cps):
    with pytest.raises(pm.RegimeError):
        pm.masses_single(params, cps)
    assert pm.masses_single(params, cps, force=True).n.sum() == pytest.approx(1.0)


def test_fee_gap_moves_single_purchase_cut(cps):
    p0 = pm.calibration_params(theta=0.0)
    c = pm.make_cps([10, 10, 12, 10, 10, 10], 2.27)
    m = pm.masses_single(p0, c)
    assert m.n[2] == pytest.approx(0.2 - 2 / 500)


def test_all_dual_masses_ignore_delays(cps):
    p = pm.calibration_params(V=200)
    m = pm.masses_all_dual(p, cps, [6, 6, 3, 6, 6, 6])
    assert m.n[2] == pytest.approx(0.4) and m.n[0] == pytest.approx(0.2)
    assert m.n1[2] == pytest.approx(0.2 + 3 / 500)
    with pytest.raises(pm.RegimeError):
        pm.masses_all_dual(pm.calibration_params(), cps)


def test_uniform_cdf_reproduces_closed_form(params, cps):
    d = [6, 5.5, 4.5, 6, 5.9, 6]
    a = pm.masses_multi(params, cps, d)
    b = pm.masses_nonuniform(params, cps, d, pm.UNIFORM)
    assert np.allclose(a.n, b.n, atol=1e-14) and np.allclose(a.n1, b.n1, atol=1e-14)


def test_distribution_validation():
    with pytest.raises(pm.MarketError):
        pm.DistributionSpec(((0, 0), (0.5, 0.7), (0.4, 0.8), (1, 1)))
    with pytest.raises(pm.MarketError):
        pm.DistributionSpec(((0, 0), (0.5, 0.7), (0.6, 0.6), (1, 1)))
    with pytest.raises(pm.MarketError):
        pm.DistributionSpec(((0, 0.1), (1, 1)))
    dist = pm.DistributionSpec(((0, 0), (0.5, 0.8), (1, 1)))
    assert dist.cdf(0.25) == pytest.approx(0.4)
    assert dist.cdf(-1) == 0 and dist.cdf(2) == 1


def test_revenue_and_profit(params, cps, cost1):
    m = pm.masses_default(params, cps)
    r = pm.cp_revenue(params, cps[2], m[3])
    assert r == pytest.approx(0.296 * 10 + 5 * 2.27 * (0.2 + 0.5 * 0.096))
    assert pm.isp_profit(params, cps, m, np.zeros(6), None, cost1) == 33


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(3.0, 6.0), min_size=6, max_size=6))
def test_primary_masses_partition_the_line(d):
    params = pm.calibration_params()
    m = pm.masses_multi(params, pm.calibration_cps(), d)
    assert m.n1.sum() == pytest.approx(1.0, abs=1e-12)
    # lowering a delay never costs the CP users
    for j in range(6):
        if d[j] > 3.0:
            lower = list(d)
            lower[j] -= 0.5
            assert pm.masses_multi(params, pm.calibration_cps(), lower).n[j] > m.n[j]
