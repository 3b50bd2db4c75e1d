"""ISP fast-lane cost models C(d): per user, per unit of traffic."""

from __future__ import annotations

from dataclasses import dataclass

from .model import MarketError


@dataclass(frozen=True)
class ReciprocalCost:
    """C(d) = c (1/d - 1/d0): zero at the default delay, unbounded as d -> 0."""

    c: float = 1.0
    family: str = "reciprocal"

    def __post_init__(self):
        if not self.c > 0:
            raise MarketError("cost coefficient c must be > 0")

    def cost(self, d, d0):
        return self.c * (1.0 / d - 1.0 / d0)

    def slope(self, d, d0):
        return -self.c / (d * d)

    def to_dict(self) -> dict:
        return {"family": self.family, "c": self.c}


COST_FAMILIES = {"reciprocal": ReciprocalCost}


def cost_from_dict(spec: dict | None):
    if spec is None:
        return ReciprocalCost()
    spec = dict(spec)
    family = spec.pop("family", "reciprocal")
    try:
        cls = COST_FAMILIES[family]
    except KeyError:
        raise MarketError(f"unknown cost family {family!r}") from None
    return cls(**spec)
