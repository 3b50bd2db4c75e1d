import math

import numpy as np
import pytest

import priomarket as pm
from priomarket import optimizer as op
from priomarket import welfare as wf


def test_segment_closed_form_value(params, cps):
    # 0.5 * (0.2 * 44) + 125 * 2 * 0.148^2
    assert wf.segment_welfare_closed(params, cps, 3, 6.0, 6.0) == pytest.approx(4.4 + 5.476, abs=1e-12)


def test_equal_delays_drop_the_gap_term(params, cps):
    a = wf.segment_welfare_closed(params, cps, 2, 5.0, 5.0)
    L, t = params.spacing, params.t
    tau = (100 - 5 - 20) / t
    assert a == pytest.approx(0.5 * L * (100 - 5 - t / (2 * 5)) + 0.5 * 0.5 * t * 2 * tau * tau)


def test_closed_form_falls_with_delay(params, cps):
    base = wf.segment_welfare_closed(params, cps, 3, 5.0, 5.5)
    assert wf.segment_welfare_closed(params, cps, 3, 5.0 - 1e-4, 5.5) > base
    assert wf.segment_welfare_closed(params, cps, 3, 5.0, 5.5 - 1e-4) > base
    with pytest.raises(pm.MarketError):
        wf.segment_welfare_closed(params, cps, 6, 6, 6)


def test_numeric_segments_sum_to_total(params, cps):
    rep = wf.total_welfare_numeric(params, cps, [6, 6, 4.5, 6, 6, 6], 20001)
    assert len(rep.segments) == 5
    assert abs(math.fsum(rep.segments) - rep.total) <= 1e-9
    assert not rep.includes_access_fee
    with pytest.raises(pm.MarketError):
        wf.total_welfare_numeric(params, cps, None, 100)


def test_delta_closed_vs_numeric(params, cps, cost1):
    post = pm.DelayProfile.default(params).replace(3, op.optimal_delay(params, cps[2], cost1))
    closed = wf.welfare_delta(params, cps, None, post)
    for N in (50001, 100001):
        numeric = wf.welfare_delta(params, cps, None, post, method="numeric", N=N)
        assert abs(closed - numeric) <= max(1e-3, 5 / N)
    assert closed > 0


def test_delta_converges_with_grid(params, cps):
    post = [6, 6, 4.5, 6, 6, 6]
    a = wf.welfare_delta(params, cps, None, post, "numeric", N=20001)
    b = wf.welfare_delta(params, cps, None, post, "numeric", N=40001)
    assert abs(a - b) <= max(1e-3, 5 / 20001)


def test_zero_delta_for_equal_profiles(params, cps):
    assert wf.welfare_delta(params, cps, None, None) == 0
    assert wf.welfare_delta(params, cps, None, None, "numeric", N=2001) == 0


def test_opt_out_heavy_market_has_nonnegative_welfare(cps):
    p = pm.calibration_params(V=40)
    assert wf.total_welfare_numeric(p, cps, None, 2001).total >= 0


def test_throttling_can_reverse_the_gain(params):
    cps = pm.make_cps([6, 12, 6, 6, 6, 6], 2.27)
    d = op.optimal_delay(params, cps[1], pm.ReciprocalCost(2.0))
    post = np.full(6, 6.06)
    post[1] = d
    assert wf.welfare_delta(params, cps, None, np.where(np.arange(6) == 1, d, 6.0)) > 0
    assert wf.welfare_delta(params, cps, None, post) < 0


def test_unknown_method(params, cps):
    with pytest.raises(pm.MarketError):
        wf.welfare_delta(params, cps, None, None, method="guess")
