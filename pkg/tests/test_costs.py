import pytest

import priomarket as pm
from priomarket.costs import cost_from_dict


def test_reciprocal_shape():
    c = pm.ReciprocalCost(2.0)
    assert c.cost(6.0, 6.0) == 0
    assert c.cost(3.0, 6.0) == pytest.approx(1 / 3)
    assert c.slope(6.0, 6.0) == pytest.approx(-2 / 36)
    assert c.cost(1e-9, 6.0) > 1e8


def test_cost_from_dict():
    assert cost_from_dict(None) == pm.ReciprocalCost(1.0)
    assert cost_from_dict({"c": 2}).c == 2
    with pytest.raises(pm.MarketError):
        cost_from_dict({"family": "linear"})
    with pytest.raises(pm.MarketError):
        pm.ReciprocalCost(0.0)
