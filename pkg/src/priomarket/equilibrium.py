"""Closed-form equilibrium user masses, CP revenues and ISP profit.

Covers multi-purchasing users (the main case), the default no-prioritization
profile, single-purchasing users (theta = 0), the all-dual relaxation and a
non-uniform user distribution given by a piecewise-linear CDF.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import (
    CPProfile,
    MarketError,
    MarketParams,
    Regime,
    RegimeError,
    as_delays,
    check_cps,
    cp_positions,
    secondary_reach,
    validate_assumptions,
)

NEG_TOL = 1e-12


class NegativeMassError(MarketError):
    def __init__(self, j: int, what: str, value: float):
        super().__init__(f"CP {j}: negative {what} mass {value:.6g}; parameters outside the closed form's validity")
        self.j = j
        self.what = what
        self.value = value


@dataclass(frozen=True)
class MassBreakdown:
    """Per-CP total, primary and secondary user masses (index 0 is CP 1)."""

    n: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    regime: Regime | None = None

    def __getitem__(self, j: int) -> tuple[float, float, float]:
        return float(self.n[j - 1]), float(self.n1[j - 1]), float(self.n2[j - 1])

    def __len__(self) -> int:
        return len(self.n)

    @property
    def dual_share(self) -> float:
        """Mass of users holding two subscriptions."""
        return float(self.n2.sum())


def _finish(n, n1, regime, check=True) -> MassBreakdown:
    n = np.asarray(n, dtype=float)
    n1 = np.asarray(n1, dtype=float)
    n2 = n - n1
    if check:
        for what, arr in (("total", n), ("primary", n1), ("secondary", n2)):
            bad = np.flatnonzero(arr < -NEG_TOL)
            if bad.size:
                raise NegativeMassError(int(bad[0]) + 1, what, float(arr[bad[0]]))
    return MassBreakdown(n, n1, n2, regime)


def _regime(params, cps, strict: bool, allowed=(Regime.FULL,)) -> Regime:
    check_cps(params, cps)
    regime = validate_assumptions(params, cps).regime
    if strict and regime not in allowed:
        raise RegimeError(f"closed form requires regime {[r.value for r in allowed]}, got {regime.value}")
    return regime


def primary_masses(params: MarketParams, d: np.ndarray) -> np.ndarray:
    """Primary-user masses when every primary cut sits at the delay-shifted
    midpoint between neighbours (identical for the multi and all-dual cases).

    ``d`` may carry leading batch axes; CPs run along the last axis.
    """
    L, t = params.spacing, params.t
    n1 = np.empty_like(d, dtype=float)
    n1[..., 1:-1] = L + (d[..., 2:] + d[..., :-2] - 2 * d[..., 1:-1]) / (2 * t)
    # end CPs have one neighbour: CP 2 for CP 1, CP M-1 for CP M
    n1[..., 0] = 0.5 * (L + (d[..., 1] - d[..., 0]) / t)
    n1[..., -1] = 0.5 * (L + (d[..., -2] - d[..., -1]) / t)
    return n1


def multi_n(params: MarketParams, S: np.ndarray, d: np.ndarray) -> np.ndarray:
    tau = (params.V - d - S / params.theta) / params.t
    n = 2 * tau
    n[..., 0] = tau[..., 0]
    n[..., -1] = tau[..., -1]
    return n


def single_n(params: MarketParams, S: np.ndarray, d: np.ndarray) -> np.ndarray:
    L, t = params.spacing, params.t
    S = np.broadcast_to(S, d.shape)
    n = np.empty_like(d, dtype=float)
    n[..., 1:-1] = (L + (d[..., 2:] + d[..., :-2] - 2 * d[..., 1:-1]) / (2 * t)
                    + (S[..., 2:] + S[..., :-2] - 2 * S[..., 1:-1]) / (2 * t))
    n[..., 0] = 0.5 * (L + (d[..., 1] - d[..., 0]) / t + (S[..., 1] - S[..., 0]) / t)
    n[..., -1] = 0.5 * (L + (d[..., -2] - d[..., -1]) / t + (S[..., -2] - S[..., -1]) / t)
    return n


def all_dual_n(params: MarketParams, d: np.ndarray) -> np.ndarray:
    L = params.spacing
    n = np.full(d.shape, 2 * L)
    n[..., 0] = L
    n[..., -1] = L
    return n


def nonuniform_n_n1(params: MarketParams, S: np.ndarray, d: np.ndarray, dist) -> tuple[np.ndarray, np.ndarray]:
    """Total and primary masses under a general user CDF."""
    pos = cp_positions(params.M)
    L, t = params.spacing, params.t
    F = dist.cdf
    tau = (params.V - d - S / params.theta) / t
    # primary cut between CP j and CP j+1, shifted by their delay gap
    cuts = pos[:-1] + 0.5 * L + (d[..., 1:] - d[..., :-1]) / (2 * t)
    Fc = F(cuts)
    n = F(pos + tau) - F(pos - tau)
    n[..., 0] = F(tau[..., 0])
    n[..., -1] = 1.0 - F(1.0 - tau[..., -1])
    n1 = np.empty_like(n)
    n1[..., 0] = Fc[..., 0]
    n1[..., 1:-1] = Fc[..., 1:] - Fc[..., :-1]
    n1[..., -1] = 1.0 - Fc[..., -1]
    return n, n1


def _fees(cps) -> np.ndarray:
    return np.array([cp.S for cp in cps], dtype=float)


def masses_multi(params: MarketParams, cps: Sequence[CPProfile], delays=None, *,
                 strict: bool = False, allow_throttling: bool = False,
                 check_negative: bool = True) -> MassBreakdown:
    """Equilibrium masses with multi-purchasing users.

    A middle CP reaches ``tau`` to each side (n = 2 tau), an end CP one side only.
    With ``strict`` the call refuses parameters outside the full-assumption regime;
    otherwise the formulas are evaluated anyway and the regime recorded.
    ``check_negative=False`` returns even negative masses, for diagnostics.
    """
    regime = _regime(params, cps, strict)
    if params.theta == 0:
        raise RegimeError("theta = 0: use masses_single")
    d = as_delays(params, delays, allow_throttling)
    return _finish(multi_n(params, _fees(cps), d), primary_masses(params, d), regime, check_negative)


def masses_default(params: MarketParams, cps: Sequence[CPProfile], *, strict: bool = False) -> MassBreakdown:
    return masses_multi(params, cps, None, strict=strict)


def masses_single(params: MarketParams, cps: Sequence[CPProfile], delays=None, *,
                  force: bool = False, allow_throttling: bool = False) -> MassBreakdown:
    """Masses when users buy a single CP; primary cuts shift with fees too."""
    check_cps(params, cps)
    regime = validate_assumptions(params, cps).regime
    if not (force or params.theta == 0 or regime is Regime.NO_DUAL):
        raise RegimeError(f"single-purchase masses need theta = 0 or the NoDual regime, got {regime.value}")
    d = as_delays(params, delays, allow_throttling)
    n = single_n(params, _fees(cps), d)
    return _finish(n, n, regime)


def masses_all_dual(params: MarketParams, cps: Sequence[CPProfile], delays=None, *,
                    force: bool = False, allow_throttling: bool = False) -> MassBreakdown:
    """Masses when theta is large enough that every user holds two CPs."""
    check_cps(params, cps)
    regime = validate_assumptions(params, cps).regime
    if not force and regime is not Regime.ALL_DUAL:
        raise RegimeError(f"all-dual masses need the AllDual regime, got {regime.value}")
    d = as_delays(params, delays, allow_throttling)
    return _finish(all_dual_n(params, d), primary_masses(params, d), regime)


# ---------------------------------------------------------------------------
# non-uniform users


@dataclass(frozen=True)
class DistributionSpec:
    """Piecewise-linear CDF of user positions given by (position, cdf) knots."""

    knots: tuple = ((0.0, 0.0), (1.0, 1.0))

    def __post_init__(self):
        knots = tuple((float(x), float(F)) for x, F in self.knots)
        object.__setattr__(self, "knots", knots)
        if len(knots) < 2 or knots[0] != (0.0, 0.0) or knots[-1] != (1.0, 1.0):
            raise MarketError("CDF knots must start at (0, 0) and end at (1, 1)")
        xs = np.array([k[0] for k in knots])
        Fs = np.array([k[1] for k in knots])
        if np.any(np.diff(xs) <= 0):
            raise MarketError("CDF knot positions must be strictly increasing")
        if np.any(np.diff(Fs) < 0):
            raise MarketError("CDF values must be nondecreasing")

    def cdf(self, x):
        xs = [k[0] for k in self.knots]
        Fs = [k[1] for k in self.knots]
        # constant outside the support
        return np.interp(x, xs, Fs, left=0.0, right=1.0)

    def to_dict(self) -> dict:
        return {"knots": [list(k) for k in self.knots]}


UNIFORM = DistributionSpec()


def masses_nonuniform(params: MarketParams, cps: Sequence[CPProfile], delays=None,
                      dist: DistributionSpec = UNIFORM, *, strict: bool = False,
                      allow_throttling: bool = False) -> MassBreakdown:
    """The multi-purchasing cut points integrated against a general user CDF."""
    regime = _regime(params, cps, strict)
    d = as_delays(params, delays, allow_throttling)
    n, n1 = nonuniform_n_n1(params, _fees(cps), d, dist)
    return _finish(n, n1, regime)


# ---------------------------------------------------------------------------
# revenues and profit


def cp_revenue(params: MarketParams, cp: CPProfile, masses_for_j, price: float = 0.0, z: int | None = None) -> float:
    """CP revenue: subscriptions, attenuated ad revenue, minus prioritization fees."""
    n, n1, n2 = masses_for_j
    z = cp.z if z is None else z
    return n * cp.S + params.lam * (cp.r * (n1 + params.delta * n2) - z * n * price)


def cp_revenues(params: MarketParams, cps: Sequence[CPProfile], masses: MassBreakdown, prices=None) -> np.ndarray:
    """Revenue of every CP; a CP with a nonzero price is taken to be prioritized."""
    prices = np.zeros(len(cps)) if prices is None else np.asarray(prices, dtype=float)
    return np.array([cp_revenue(params, cp, masses[cp.j], prices[k], z=1)
                     for k, cp in enumerate(cps)])


def isp_profit(params: MarketParams, cps: Sequence[CPProfile], masses: MassBreakdown, prices, delays, cost, z=None) -> float:
    """Access fees plus prioritization margins. By default a CP counts as
    prioritized when its delay is below d0."""
    d = as_delays(params, delays, allow_throttling=True)
    p = np.asarray(prices, dtype=float)
    if z is None:
        z = d < params.d0
    z = np.asarray(z, dtype=bool)
    if not z.any():
        return float(params.F)
    margin = p[z] - cost.cost(d[z], params.d0)
    return float(params.F + params.lam * np.sum(masses.n[z] * margin))


@dataclass(frozen=True)
class PrioritizationDeltas:
    dn: np.ndarray
    dn1: np.ndarray
    dn2: np.ndarray
    dR: np.ndarray

    def __getitem__(self, j: int) -> tuple[float, float, float, float]:
        k = j - 1
        return float(self.dn[k]), float(self.dn1[k]), float(self.dn2[k]), float(self.dR[k])


def prioritization_deltas(params: MarketParams, cps: Sequence[CPProfile], pre_delays, post_delays,
                          pre_prices=None, post_prices=None, *, allow_throttling: bool = False) -> PrioritizationDeltas:
    """Change in each CP's masses and revenue between two delay profiles.

    Prices default to zero, i.e. the revenue change before any fee is paid.
    """
    pre = masses_multi(params, cps, pre_delays, allow_throttling=allow_throttling)
    post = masses_multi(params, cps, post_delays, allow_throttling=allow_throttling)
    r_pre = cp_revenues(params, cps, pre, pre_prices)
    r_post = cp_revenues(params, cps, post, post_prices)
    return PrioritizationDeltas(post.n - pre.n, post.n1 - pre.n1, post.n2 - pre.n2, r_post - r_pre)


@dataclass
class EquilibriumOutcome:
    """Everything a solved market reports, per CP and in aggregate."""

    delays: np.ndarray
    prices: np.ndarray
    masses: MassBreakdown
    revenues: np.ndarray
    profit: float
    regime: Regime
    mode: str
    welfare: float | None = None
    meta: dict = field(default_factory=dict)
