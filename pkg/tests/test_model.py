import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import priomarket as pm
from priomarket.model import Bundle, as_delays, nearest_two


def test_params_reject_bad_values():
    with pytest.raises(pm.MarketError):
        pm.calibration_params(t=0)
    with pytest.raises(pm.MarketError):
        pm.calibration_params(theta=1.0)
    with pytest.raises(pm.MarketError):
        pm.calibration_params(M=2)
    with pytest.raises(pm.MarketError):
        pm.calibration_params(delta=1.5)


def test_theta_zero_is_allowed_but_has_no_secondary_reach(params, cps):
    p0 = pm.calibration_params(theta=0.0)
    assert pm.validate_assumptions(p0, cps).regime is pm.Regime.NO_DUAL
    with pytest.raises(pm.RegimeError):
        pm.thresholds(p0, cps[0], 6.0)


def test_thresholds_at_calibration(params, cps):
    tp, ts = pm.thresholds(params, cps[2], 6.0)
    assert tp == pytest.approx(0.168, abs=1e-15)
    assert ts == pytest.approx(0.148, abs=1e-15)


def test_delay_profile_guards_throttling(params):
    with pytest.raises(pm.ThrottlingError):
        as_delays(params, [6, 6, 6.1, 6, 6, 6])
    d = as_delays(params, [6, 6, 6.1, 6, 6, 6], allow_throttling=True)
    assert d[2] == 6.1
    prof = pm.DelayProfile.default(params).replace(3, 4.5)
    assert prof[3] == 4.5 and not prof.is_throttled(params)
    with pytest.raises(pm.MarketError):
        as_delays(params, [6, 6, 6])


def test_bundle_identity():
    assert Bundle.dual(2, 3) == Bundle.dual(2, 3)
    assert Bundle.dual(2, 3) != Bundle.dual(3, 2)
    assert repr(Bundle.dual(2, 3)) == "Dual(2,3)"
    assert Bundle.opt_out().is_opt_out and Bundle.single(4).cps() == (4,)
    assert len({Bundle.single(1), Bundle.single(1), Bundle.opt_out()}) == 2


def test_best_bundle_at_a_cp_location(params, cps):
    # neighbours sit 0.2 away, beyond the 0.148 secondary reach
    x = pm.model.cp_position(3, params.M)
    assert pm.best_bundle(x, params, cps, None) == Bundle.single(3)
    # 0.06 past CP3 towards CP4, CP4 is 0.14 away and worth adding
    assert pm.best_bundle(x + 0.06, params, cps, None) == Bundle.dual(3, 4)


def test_best_bundle_tie_goes_to_lower_primary(params, cps):
    # midpoint between CP2 and CP3: Dual(2,3) and Dual(3,2) tie exactly
    b = pm.best_bundle(0.3, params, cps, None)
    assert b == Bundle.dual(2, 3)


def test_opt_out_when_everything_is_too_expensive(cps):
    p = pm.calibration_params(V=30)
    assert pm.best_bundle(0.5, p, cps, None).is_opt_out


def test_adjacent_candidates_match_full_scan_under_full_regime():
    p = pm.MarketParams(30.0, 100.0, 0.4, 0.5, 5.0, 1.0, 6, 2.0)
    c = pm.make_cps(5.0, 2.0, 6)
    assert pm.validate_assumptions(p, c).regime is pm.Regime.FULL
    for x in np.linspace(0, 1, 97):
        assert pm.best_bundle(x, p, c, None, "all") == pm.best_bundle(x, p, c, None, "adjacent")


def test_nearest_two_includes_ties():
    assert nearest_two(0.1, 6) == {1, 2}
    assert nearest_two(0.2, 6) == {1, 2, 3}


def test_regime_classification():
    c = pm.calibration_cps()
    rep = pm.validate_assumptions(pm.calibration_params(), c)
    assert rep.regime is pm.Regime.PARTIAL and "part2_upper" in rep.degenerate
    assert math.isinf(rep.margins["part2_upper"])
    assert pm.validate_assumptions(pm.calibration_params(V=200), c).regime is pm.Regime.ALL_DUAL
    full = pm.MarketParams(30.0, 100.0, 0.4, 0.5, 5.0, 1.0, 6, 2.0)
    assert pm.validate_assumptions(full, pm.make_cps(5.0, 2.0, 6)).regime is pm.Regime.FULL
    assert pm.validate_assumptions(pm.MarketParams(30.0, 100.0, 0.01, 0.5, 5.0, 1.0, 6, 2.0),
                                   pm.make_cps(5.0, 2.0, 6)).regime is pm.Regime.NO_DUAL


def test_make_cps_lengths():
    assert len(pm.make_cps([1, 2, 3], 2.0)) == 3
    with pytest.raises(pm.MarketError):
        pm.make_cps(1.0, 2.0)
    with pytest.raises(pm.MarketError):
        pm.make_cps([1, 2], [1, 2, 3])


@settings(max_examples=60, deadline=None)
@given(x=st.floats(0, 1), d3=st.floats(1.0, 6.0))
def test_best_bundle_utility_is_maximal(x, d3):
    params = pm.calibration_params()
    cps = pm.calibration_cps()
    d = pm.DelayProfile.default(params).replace(3, d3)
    b = pm.best_bundle(x, params, cps, d)
    u = pm.bundle_utility(x, b, params, cps, d)
    others = [Bundle.single(j) for j in range(1, 7)]
    others += [Bundle.dual(j, k) for j in range(1, 7) for k in range(1, 7) if j != k]
    best_other = max(pm.bundle_utility(x, o, params, cps, d) for o in others)
    assert u >= max(best_other, 0.0) - 1e-9
