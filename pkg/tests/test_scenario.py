import json

import pytest

import priomarket as pm
from priomarket.scenario import ScenarioError, default_scenario, load_scenario, loads


def test_bundled_default_loads():
    sc = default_scenario()
    assert sc.params == pm.calibration_params()
    assert [cp.S for cp in sc.cps] == [10.0] * 6
    assert sc.mode == "auto" and sc.cost == pm.ReciprocalCost(1.0)
    assert pm.validate_assumptions(sc.params, sc.cps).regime in (pm.Regime.PARTIAL, pm.Regime.DEGENERATE)


def test_round_trip(tmp_path):
    sc = default_scenario()
    raw = sc.to_dict()
    raw["distribution"] = {"knots": [[0, 0], [0.5, 0.6], [1, 1]]}
    raw["delays"] = [6, 6, 5, 6, 6, 6]
    raw["throttle"] = 1.01
    raw["sweep"] = {"path": "cps.1.S", "range": [6, 16], "steps": 21}
    sc = loads(json.dumps(raw))
    path = tmp_path / "s.json"
    sc.save(path)
    again = load_scenario(path)
    assert again == sc
    assert again.to_dict() == sc.to_dict()


def test_defaults_applied():
    raw = default_scenario().to_dict()
    del raw["cost"], raw["mode"]
    sc = loads(json.dumps(raw))
    assert sc.mode == "auto" and sc.cost == pm.ReciprocalCost(1.0)


def test_cp_count_must_match():
    raw = default_scenario().to_dict()
    raw["cps"] = raw["cps"][:5]
    with pytest.raises(ScenarioError) as err:
        loads(json.dumps(raw))
    assert err.value.field == "cps"


def test_unknown_keys_rejected():
    raw = default_scenario().to_dict()
    raw["market"]["colour"] = "red"
    with pytest.raises(ScenarioError) as err:
        loads(json.dumps(raw))
    assert err.value.field == "market"


def test_parse_error_has_line():
    with pytest.raises(ScenarioError) as err:
        loads('{\n  "market": {\n    "V": 1,,\n  }\n}')
    assert err.value.line == 3


def test_invariant_violation_named():
    raw = default_scenario().to_dict()
    raw["delays"] = [6, 6, 6]
    with pytest.raises(ScenarioError) as err:
        loads(json.dumps(raw))
    assert err.value.field == "delays"
    raw = default_scenario().to_dict()
    raw["sweep"] = {"path": "cps.1.S", "range": [16, 6], "steps": 3}
    with pytest.raises(ScenarioError):
        loads(json.dumps(raw))


def test_sweep_points():
    raw = default_scenario().to_dict()
    raw["sweep"] = [{"path": "cps.1.S", "range": [6, 16], "steps": 21},
                    {"path": "cost.c", "range": [1, 2], "steps": 2}]
    pts = list(loads(json.dumps(raw)).points())
    assert len(pts) == 42
    vals, sc = pts[-1]
    assert vals == {"cps.1.S": 16.0, "cost.c": 2.0}
    assert sc.cps[0].S == 16.0 and sc.cost.c == 2.0


def test_missing_file(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "nope.json")
