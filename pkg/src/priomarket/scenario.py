"""Scenario files: JSON in, validated objects out, and back again."""

from __future__ import annotations

import copy
import itertools
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .costs import cost_from_dict
from .equilibrium import DistributionSpec
from .model import CPProfile, MarketError, MarketParams, as_delays

MODES = ("auto", "multi", "single", "all_dual")


class ScenarioError(MarketError):
    """Bad scenario file; ``field`` names the offending entry when known."""

    def __init__(self, msg: str, field: str | None = None, line: int | None = None):
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{msg} ({', '.join(where)})" if where else msg)
        self.field = field
        self.line = line


def _schema() -> dict:
    return json.loads(resources.files("priomarket").joinpath("data/scenario.schema.json").read_text())


@dataclass(frozen=True)
class SweepAxis:
    path: str
    lo: float
    hi: float
    steps: int

    def values(self) -> np.ndarray:
        if self.steps == 1:
            return np.array([self.lo])
        return np.linspace(self.lo, self.hi, self.steps)

    def to_dict(self) -> dict:
        return {"path": self.path, "range": [self.lo, self.hi], "steps": self.steps}


@dataclass
class Scenario:
    params: MarketParams
    cps: list
    cost: object
    distribution: DistributionSpec | None = None
    delays: tuple | None = None
    throttle: float | None = None
    mode: str = "auto"
    sweep: tuple = ()
    id: str = "scenario"

    def to_dict(self) -> dict:
        p = self.params
        out = {
            "id": self.id,
            "market": {"V": p.V, "t": p.t, "theta": p.theta, "delta": p.delta, "lam": p.lam,
                       "F": p.F, "M": p.M, "d0": p.d0},
            "cps": [{"S": cp.S, "r": cp.r} for cp in self.cps],
            "cost": self.cost.to_dict(),
            "mode": self.mode,
        }
        if self.distribution is not None:
            out["distribution"] = self.distribution.to_dict()
        if self.delays is not None:
            out["delays"] = list(self.delays)
        if self.throttle is not None:
            out["throttle"] = self.throttle
        if self.sweep:
            out["sweep"] = [a.to_dict() for a in self.sweep]
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def save(self, path) -> None:
        Path(path).write_text(self.dumps() + "\n")

    def with_value(self, path: str, value: float) -> "Scenario":
        """Copy with one dotted path (as used by sweeps) set to ``value``."""
        raw = self.to_dict()
        raw.pop("sweep", None)
        _set_path(raw, path, value)
        return from_dict(raw)

    def points(self):
        """Cartesian product of the sweep axes, as (values dict, scenario)."""
        if not self.sweep:
            yield {}, self
            return
        grids = [a.values() for a in self.sweep]
        for combo in itertools.product(*grids):
            sc = self
            for axis, v in zip(self.sweep, combo):
                sc = sc.with_value(axis.path, float(v))
            yield {a.path: float(v) for a, v in zip(self.sweep, combo)}, sc


def _set_path(raw: dict, path: str, value: float) -> None:
    parts = path.split(".")
    if parts[0] == "cps":
        idx = int(parts[1])
        if not 1 <= idx <= len(raw["cps"]):
            raise ScenarioError(f"sweep path {path!r} names a missing CP", "sweep")
        raw["cps"][idx - 1][parts[2]] = value
    elif parts[0] == "market":
        if parts[1] not in raw["market"]:
            raise ScenarioError(f"unknown market parameter in {path!r}", "sweep")
        raw["market"][parts[1]] = int(value) if parts[1] == "M" else value
    elif parts[0] == "cost":
        raw["cost"]["c"] = value
    elif parts[0] == "throttle":
        raw["throttle"] = value
    else:
        raise ScenarioError(f"unknown sweep path {path!r}", "sweep")


def from_dict(raw: dict) -> Scenario:
    """Validate a parsed scenario document."""
    try:
        jsonschema.validate(raw, _schema())
    except jsonschema.ValidationError as e:
        where = [str(p) for p in e.absolute_path]
        if e.validator == "required":
            # name the missing key itself
            missing = re.match(r"'([^']+)'", e.message)
            if missing:
                where.append(missing.group(1))
        raise ScenarioError(f"schema violation: {e.message}", ".".join(where) or None) from None

    raw = copy.deepcopy(raw)
    try:
        params = MarketParams(**raw["market"])
    except MarketError as e:
        raise ScenarioError(str(e), "market") from None
    if len(raw["cps"]) != params.M:
        raise ScenarioError(f"{len(raw['cps'])} CPs listed but M = {params.M}", "cps")
    cps = [CPProfile(j + 1, float(c["S"]), float(c["r"])) for j, c in enumerate(raw["cps"])]
    try:
        cost = cost_from_dict(raw.get("cost"))
    except (MarketError, TypeError) as e:
        raise ScenarioError(str(e), "cost") from None
    dist = None
    if "distribution" in raw:
        try:
            dist = DistributionSpec(tuple(tuple(k) for k in raw["distribution"]["knots"]))
        except MarketError as e:
            raise ScenarioError(str(e), "distribution") from None
    delays = None
    if "delays" in raw:
        try:
            delays = tuple(float(v) for v in as_delays(params, raw["delays"], allow_throttling=True))
        except MarketError as e:
            raise ScenarioError(str(e), "delays") from None
    sweep = raw.get("sweep", ())
    if isinstance(sweep, dict):
        sweep = [sweep]
    axes = []
    for a in sweep:
        lo, hi = a["range"]
        if hi < lo:
            raise ScenarioError(f"empty sweep range {a['range']}", "sweep")
        axes.append(SweepAxis(a["path"], float(lo), float(hi), int(a["steps"])))
    return Scenario(params, cps, cost, dist, delays, raw.get("throttle"), raw.get("mode", "auto"),
                    tuple(axes), raw.get("id", "scenario"))


def loads(text: str) -> Scenario:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"invalid JSON: {e.msg}", line=e.lineno) from None
    if not isinstance(raw, dict):
        raise ScenarioError("top level must be an object")
    return from_dict(raw)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ScenarioError(f"cannot read {path}: {e.strerror}") from None
    return loads(text)


def default_scenario() -> Scenario:
    """The bundled calibration with six identical CPs."""
    return loads(resources.files("priomarket").joinpath("data/table2_default.json").read_text())
