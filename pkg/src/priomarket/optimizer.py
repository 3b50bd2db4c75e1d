"""The ISP's side of the game: fast-lane delays, binding prices, joint programs,
uniform menus and capacity reallocation.

The ISP moves first and extracts each CP's whole surplus, so every price binds
the CP's participation constraint R_j(d, p) = R_j(d0, 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import equilibrium as eq
from .model import (
    CPProfile,
    DelayProfile,
    MarketError,
    MarketParams,
    Regime,
    as_delays,
    check_cps,
    thresholds,
    validate_assumptions,
)
from .search import grid_golden, newton_polish

EPS_FRAC = 1e-6  # lower end of the delay search, as a fraction of d0
GRID = 256
REL_TOL = 1e-10


class InfeasibleError(MarketError):
    pass


class ConvergenceError(MarketError):
    def __init__(self, msg, residual):
        super().__init__(f"{msg} (residual {residual:.3g})")
        self.residual = residual


@dataclass(frozen=True)
class PrioritizationOffer:
    j: int
    d_star: float
    p_star: float
    accepted: bool

    def __post_init__(self):
        if self.accepted and self.p_star < 0:
            raise MarketError("accepted offer must carry a nonnegative price")


@dataclass(frozen=True)
class Affordability:
    affordable: bool
    margin: float
    bound: float
    slope_at_d0: float


# ---------------------------------------------------------------------------
# per-CP program (multi-purchasing users)


def _rev_weight(params: MarketParams, cp: CPProfile) -> float:
    # subscription fee plus the ad revenue of a user who is primary half the time
    return cp.S + 0.5 * (1 + params.delta) * params.lam * cp.r


def fast_lane_objective(params: MarketParams, cp: CPProfile, cost, d: float) -> float:
    """Quantity the ISP minimizes over the fast-lane delay of one CP."""
    tau = (params.V - d - cp.S / params.theta) / params.t
    return _rev_weight(params, cp) / params.t * d + params.lam * tau * cost.cost(d, params.d0)


def analytic_delay(params: MarketParams, cp: CPProfile, cost) -> float:
    """Closed-form minimizer for the reciprocal cost family, clamped to d0."""
    if getattr(cost, "family", None) != "reciprocal":
        raise MarketError("analytic delay is only available for the reciprocal cost")
    A = _rev_weight(params, cp) / params.t
    reach = params.V - cp.S / params.theta
    if reach <= 0:
        return params.d0
    root = math.sqrt(reach / (A * params.t / (params.lam * cost.c) + 1.0 / params.d0))
    return min(root, params.d0)


def optimal_delay(params: MarketParams, cp: CPProfile, cost) -> float:
    """Fast-lane delay offered to ``cp``: grid-seeded golden-section search over
    [eps, d0]; returns exactly d0 when no improvement beats the default."""
    lo, hi = EPS_FRAC * params.d0, params.d0
    f = lambda x: fast_lane_objective(params, cp, cost, x)  # noqa: E731
    d, _ = grid_golden(f, lo, hi, GRID, REL_TOL)
    d, _ = newton_polish(f, d, lo, hi)
    return d


def prioritization_price(params: MarketParams, cp: CPProfile, d_star: float) -> float:
    """Per-user, per-traffic-unit fee that leaves the CP exactly indifferent."""
    if not 0 < d_star <= params.d0 * (1 + 1e-12):
        raise MarketError("d_star must lie in (0, d0]")
    _, tau = thresholds(params, cp, d_star)
    if tau <= 0:
        raise MarketError(f"CP {cp.j}: nonpositive secondary reach at d = {d_star}")
    if d_star >= params.d0:
        return 0.0
    return _rev_weight(params, cp) / (params.lam * params.t) * (params.d0 - d_star) / tau


def affordability_check(params: MarketParams, cp: CPProfile, cost) -> Affordability:
    """Whether the ISP would build this CP a fast lane at all: the marginal cost
    at d0 must be below the CP's marginal willingness to pay."""
    slope = abs(cost.slope(params.d0, params.d0))
    denom = params.lam * (params.V - params.d0 - cp.S / params.theta)
    bound = _rev_weight(params, cp) / denom if denom > 0 else math.inf
    margin = bound - slope
    # strict inequality, with round-off treated as equality
    ok = margin > 1e-12 * max(1.0, abs(bound))
    return Affordability(ok, margin, bound, slope)


def make_offer(params: MarketParams, cp: CPProfile, cost) -> PrioritizationOffer:
    d = optimal_delay(params, cp, cost)
    if d >= params.d0:
        return PrioritizationOffer(cp.j, params.d0, 0.0, False)
    return PrioritizationOffer(cp.j, d, prioritization_price(params, cp, d), True)


def offer_profit(params: MarketParams, cps: Sequence[CPProfile], offer: PrioritizationOffer, cost) -> float:
    """ISP margin earned from one accepted offer (access fee excluded)."""
    if not offer.accepted:
        return 0.0
    d = np.full(params.M, params.d0)
    d[offer.j - 1] = offer.d_star
    n = eq.multi_n(params, eq._fees(cps), d)[offer.j - 1]
    return params.lam * n * (offer.p_star - cost.cost(offer.d_star, params.d0))


def optimize_offers(params: MarketParams, cps: Sequence[CPProfile], cost, exclusive: bool = False) -> list[PrioritizationOffer]:
    """One offer per CP. The program is separable, so every affordable CP gets a
    contract unless ``exclusive`` keeps only the most profitable one."""
    check_cps(params, cps)
    offers = [make_offer(params, cp, cost) for cp in cps]
    if exclusive:
        gains = [offer_profit(params, cps, o, cost) for o in offers]
        best = int(np.argmax(gains))
        offers = [o if k == best and o.accepted else PrioritizationOffer(o.j, params.d0, 0.0, False)
                  for k, o in enumerate(offers)]
    return offers


# ---------------------------------------------------------------------------
# joint programs (single-purchasing users, non-uniform users, all-dual users)

# mass model: (delays with CPs on the last axis) -> (n, n1)
MassFn = Callable[[np.ndarray], tuple]


def _mass_fn(params: MarketParams, cps: Sequence[CPProfile], mode: str, dist=None) -> MassFn:
    S = eq._fees(cps)
    if mode == "single":
        def fn(d):
            n = eq.single_n(params, S, d)
            return n, n
    elif mode == "nonuniform":
        def fn(d):
            return eq.nonuniform_n_n1(params, S, d, dist)
    elif mode == "all_dual":
        def fn(d):
            return eq.all_dual_n(params, d), eq.primary_masses(params, d)
    elif mode == "multi":
        def fn(d):
            return eq.multi_n(params, S, d), eq.primary_masses(params, d)
    else:
        raise MarketError(f"unknown mass model {mode!r}")
    return fn


def _gross_revenue(params, S, r, n, n1):
    # revenue before prioritization fees
    return n * S + params.lam * r * (n1 + params.delta * (n - n1))


@dataclass
class JointProgram:
    """ISP profit over a full delay vector when each CP pays its binding price.

    Each CP's fee equals its revenue gain over staying at d0 with its
    neighbours' delays held fixed; the ISP nets that gain minus fast-lane cost.
    """

    params: MarketParams
    cps: Sequence[CPProfile]
    cost: object
    masses: MassFn
    S: np.ndarray = field(init=False)
    r: np.ndarray = field(init=False)

    def __post_init__(self):
        self.S = eq._fees(self.cps)
        self.r = np.array([cp.r for cp in self.cps], dtype=float)

    def gains(self, d: np.ndarray) -> np.ndarray:
        """Revenue gain of each CP at ``d`` versus reverting itself to d0."""
        n, n1 = self.masses(d)
        base = _gross_revenue(self.params, self.S, self.r, n, n1)
        out = np.empty_like(base)
        for k in range(self.params.M):
            dk = d.copy()
            dk[..., k] = self.params.d0
            nk, n1k = self.masses(dk)
            out[..., k] = base[..., k] - _gross_revenue(self.params, self.S[k], self.r[k], nk[..., k], n1k[..., k])
        return out

    def profit(self, d: np.ndarray, ks=None) -> np.ndarray:
        """Prioritization profit (access fee excluded); -inf where a mass is nonpositive.

        ``ks`` restricts the sum to those CPs, which is all a coordinate move needs.
        """
        ks = range(self.params.M) if ks is None else ks
        n, n1 = self.masses(d)
        total = np.zeros(d.shape[:-1])
        bad = np.zeros(d.shape[:-1], dtype=bool)
        for k in ks:
            dk = d.copy()
            dk[..., k] = self.params.d0
            nk, n1k = self.masses(dk)
            gain = (_gross_revenue(self.params, self.S[k], self.r[k], n[..., k], n1[..., k])
                    - _gross_revenue(self.params, self.S[k], self.r[k], nk[..., k], n1k[..., k]))
            total = total + gain - self.params.lam * n[..., k] * self.cost.cost(d[..., k], self.params.d0)
            bad |= n[..., k] <= 0
        return np.where(bad, -np.inf, total)

    def prices(self, d: np.ndarray) -> np.ndarray:
        n, _ = self.masses(d)
        g = self.gains(d)
        with np.errstate(divide="ignore", invalid="ignore"):
            p = np.where((n > 0) & (d < self.params.d0), g / (self.params.lam * n), 0.0)
        return p


@dataclass(frozen=True)
class JointResult:
    delays: np.ndarray
    prices: np.ndarray
    profit: float
    sweeps: int
    converged: bool
    starts: int


def _coordinate_descent(prog: JointProgram, start: np.ndarray, tol: float, max_sweeps: int):
    params = prog.params
    lo, hi = EPS_FRAC * params.d0, params.d0
    d = start.copy()
    grid = np.linspace(lo, hi, GRID)
    for sweep in range(1, max_sweeps + 1):
        biggest = 0.0
        for j in range(params.M):
            # only CP j and its neighbours' terms move with d_j
            ks = range(max(j - 1, 0), min(j + 2, params.M))
            batch = np.repeat(d[None, :], GRID, axis=0)
            batch[:, j] = grid
            vals = -prog.profit(batch, ks)
            best = np.flatnonzero(vals == vals.min())[-1]
            a = grid[max(best - 1, 0)]
            b = grid[min(best + 1, GRID - 1)]

            def f(x, j=j, ks=ks):
                trial = d.copy()
                trial[j] = x
                return -float(prog.profit(trial, ks))

            x, fx = grid_golden(f, a, b, n_grid=3, rel_tol=REL_TOL)
            if vals[best] < fx:
                x = float(grid[best])
            x, _ = newton_polish(f, x, lo, hi)
            f_old = f(d[j])
            if f_old < f(x) - 1e-13 * max(1.0, abs(f_old)):
                x = d[j]
            biggest = max(biggest, abs(x - d[j]))
            d[j] = x
        if biggest <= tol:
            return d, sweep, True
    return d, max_sweeps, False


def joint_optimize(params: MarketParams, cps: Sequence[CPProfile], cost, masses: MassFn, *,
                   seed: int = 0, n_random: int = 8, tol: float = 1e-9, max_sweeps: int = 200) -> JointResult:
    """Maximize ISP profit over all delays by cyclic coordinate descent,
    restarted from all-d0, all-midpoint and ``n_random`` seeded random points."""
    prog = JointProgram(params, cps, cost, masses)
    lo, hi = EPS_FRAC * params.d0, params.d0
    rng = np.random.default_rng(seed)
    starts = [np.full(params.M, hi), np.full(params.M, 0.5 * (lo + hi))]
    starts += [rng.uniform(lo, hi, params.M) for _ in range(n_random)]
    best = None
    for s in starts:
        if not np.isfinite(prog.profit(s)):
            continue
        d, sweeps, ok = _coordinate_descent(prog, s, tol, max_sweeps)
        val = float(prog.profit(d))
        if best is None or val > best[1] + 1e-12 * max(1.0, abs(val)):
            best = (d, val, sweeps, ok)
    if best is None:
        raise InfeasibleError("no feasible starting point for the joint program")
    d, val, sweeps, ok = best
    return JointResult(d, prog.prices(d), val, sweeps, ok, len(starts))


def optimize_single_purchase(params: MarketParams, cps: Sequence[CPProfile], cost, **kw) -> JointResult:
    """Joint delays and prices when users buy a single CP (theta = 0)."""
    check_cps(params, cps)
    return joint_optimize(params, cps, cost, _mass_fn(params, cps, "single"), **kw)


def single_purchase_price(params: MarketParams, cps: Sequence[CPProfile], delays, j: int) -> float:
    """Binding fee of CP ``j`` at a given delay vector, single-purchasing users."""
    d = as_delays(params, delays)
    prog = JointProgram(params, cps, None, _mass_fn(params, cps, "single"))
    return float(prog.prices(d)[j - 1])


def optimize_nonuniform(params: MarketParams, cps: Sequence[CPProfile], cost, dist, **kw) -> JointResult:
    """Joint delays and prices when users follow the CDF ``dist``."""
    check_cps(params, cps)
    return joint_optimize(params, cps, cost, _mass_fn(params, cps, "nonuniform", dist), **kw)


def nonuniform_price(params: MarketParams, cps: Sequence[CPProfile], delays, j: int, dist) -> float:
    d = as_delays(params, delays)
    prog = JointProgram(params, cps, None, _mass_fn(params, cps, "nonuniform", dist))
    return float(prog.prices(d)[j - 1])


def optimize_all_dual(params: MarketParams, cps: Sequence[CPProfile], cost, **kw) -> JointResult:
    """Joint program when every user dual-purchases; only attention is at stake."""
    check_cps(params, cps)
    return joint_optimize(params, cps, cost, _mass_fn(params, cps, "all_dual"), **kw)


# ---------------------------------------------------------------------------
# whole-market solve


def solve_mode(params: MarketParams, cps: Sequence[CPProfile]) -> str:
    """Mass model implied by the regime: single purchase when no one dual-buys,
    all-dual when everyone does, the multi-purchase closed form otherwise."""
    if params.theta == 0:
        return "single"
    regime = validate_assumptions(params, cps).regime
    return {Regime.NO_DUAL: "single", Regime.ALL_DUAL: "all_dual"}.get(regime, "multi")


def solve_market(params: MarketParams, cps: Sequence[CPProfile], cost, *, mode: str = "auto",
                 exclusive: bool = False, throttle: float | None = None, dist=None,
                 seed: int = 0) -> eq.EquilibriumOutcome:
    """Backward induction: ISP offers, CPs accept binding offers, users choose.

    ``throttle`` multiplies d0 for every CP left in the default lane.
    """
    check_cps(params, cps)
    regime = validate_assumptions(params, cps).regime
    if mode == "auto":
        mode = solve_mode(params, cps)
    if dist is not None and mode == "multi":
        mode = "nonuniform"
    meta: dict = {"mode": mode}

    if mode == "multi":
        offers = optimize_offers(params, cps, cost, exclusive)
        d = np.array([o.d_star for o in offers])
        p = np.array([o.p_star for o in offers])
    else:
        fn = _mass_fn(params, cps, mode, dist)
        res = joint_optimize(params, cps, cost, fn, seed=seed)
        d, p = res.delays, res.prices
        meta.update(sweeps=res.sweeps, converged=res.converged)
        if exclusive:
            # keep the single CP whose stand-alone contract earns the most
            prog = JointProgram(params, cps, cost, fn)
            gains = []
            for k in range(params.M):
                dk = np.full(params.M, params.d0)
                dk[k] = d[k]
                gains.append(float(prog.profit(dk)))
            best = int(np.argmax(gains))
            keep = np.arange(params.M) == best
            d = np.where(keep, d, params.d0)
            p = np.where(keep, prog.prices(d), 0.0)

    prioritized = d < params.d0
    if throttle is not None:
        d = np.where(prioritized, d, throttle * params.d0)
        meta["throttle"] = throttle

    allow = throttle is not None and throttle > 1
    if mode == "multi":
        masses = eq.masses_multi(params, cps, d, allow_throttling=allow)
    elif mode == "single":
        masses = eq.masses_single(params, cps, d, force=True, allow_throttling=allow)
    elif mode == "all_dual":
        masses = eq.masses_all_dual(params, cps, d, force=True, allow_throttling=allow)
    else:
        masses = eq.masses_nonuniform(params, cps, d, dist, allow_throttling=allow)
    revenues = eq.cp_revenues(params, cps, masses, p)
    profit = eq.isp_profit(params, cps, masses, p, d, cost, z=prioritized)
    return eq.EquilibriumOutcome(d, p, masses, revenues, profit, regime, mode, meta=meta)


# ---------------------------------------------------------------------------
# uniform menu


@dataclass(frozen=True)
class UniformMenu:
    d: float
    p: float
    accepted: tuple[int, ...]
    profit: float
    outcome: eq.EquilibriumOutcome
    meta: dict


def _single_cp_curves(params: MarketParams, cps: Sequence[CPProfile], d_vals: np.ndarray):
    """Own-delay masses of each CP as a function of its delay, neighbours at d0.

    Rows follow ``d_vals``, columns follow CPs.
    """
    M = params.M
    D = np.full((len(d_vals), M, M), params.d0)
    idx = np.arange(M)
    D[:, idx, idx] = d_vals[:, None]
    n = eq.multi_n(params, eq._fees(cps), D)[:, idx, idx]
    n1 = eq.primary_masses(params, D)[:, idx, idx]
    return n, n1


def uniform_menu_optimize(params: MarketParams, cps: Sequence[CPProfile], cost, d_grid=None, p_grid=None,
                          n_d: int = 128, n_p: int = 512) -> UniformMenu:
    """Best single (delay, price) pair offered to every CP alike.

    A CP accepts when its revenue with the fast lane at that price is at least
    its default revenue. Ties prefer the lower price, then the lower delay.
    """
    check_cps(params, cps)
    d0 = params.d0
    discriminatory = optimize_offers(params, cps, cost)
    p_max = 2 * max(o.p_star for o in discriminatory)
    if d_grid is None:
        d_grid = d0 * np.arange(1, n_d + 1) / n_d
    if p_grid is None:
        p_grid = np.linspace(0.0, p_max, n_p) if p_max > 0 else np.array([0.0])
    d_grid = np.asarray(d_grid, dtype=float)
    p_grid = np.asarray(p_grid, dtype=float)
    if d_grid.size == 0 or p_grid.size == 0:
        raise MarketError("menu grids must be nonempty")
    if np.any(d_grid <= 0) or np.any(d_grid > d0) or np.any(p_grid < 0):
        raise MarketError("menu grid outside (0, d0] x [0, inf)")

    S = eq._fees(cps)
    r = np.array([cp.r for cp in cps])
    n, n1 = _single_cp_curves(params, cps, d_grid)          # (nd, M)
    n0, n10 = _single_cp_curves(params, cps, np.array([d0]))
    r_default = _gross_revenue(params, S, r, n0[0], n10[0])  # (M,)
    gross = _gross_revenue(params, S, r, n, n1)              # (nd, M)
    # revenue with the fast lane at price p: gross - lam n p
    R = gross[:, None, :] - params.lam * n[:, None, :] * p_grid[None, :, None]
    accept = R >= r_default - 1e-12 * np.abs(r_default)
    c = cost.cost(d_grid, d0)
    margin = params.lam * n[:, None, :] * (p_grid[None, :, None] - c[:, None, None])
    profit = np.sum(np.where(accept, margin, 0.0), axis=-1)  # (nd, np)

    best = profit.max()
    # lowest price first, then lowest delay
    cand = np.argwhere(profit >= best - 1e-12 * max(1.0, abs(best)))
    cand = cand[np.lexsort((cand[:, 0], cand[:, 1]))]
    i, k = cand[0]
    d_best, p_best = float(d_grid[i]), float(p_grid[k])
    acc = tuple(int(j) + 1 for j in np.flatnonzero(accept[i, k]))
    if best <= 0:
        # nothing worth selling: keep everyone in the default lane
        acc = ()
        d_best, p_best = d0, 0.0
        best = 0.0

    d = np.array([d_best if cp.j in acc else d0 for cp in cps])
    p = np.array([p_best if cp.j in acc else 0.0 for cp in cps])
    masses = eq.masses_multi(params, cps, d)
    outcome = eq.EquilibriumOutcome(d, p, masses, eq.cp_revenues(params, cps, masses, p),
                                    eq.isp_profit(params, cps, masses, p, d, cost, z=d < d0),
                                    validate_assumptions(params, cps).regime, "uniform_menu")
    meta = {"menu": "single (d, p) pair", "n_d": int(d_grid.size), "n_p": int(p_grid.size), "p_max": float(p_grid.max())}
    return UniformMenu(d_best, p_best, acc, float(best), outcome, meta)


# ---------------------------------------------------------------------------
# capacity reallocation


@dataclass(frozen=True)
class CapacityPlan:
    total: float
    allocations: tuple[float, ...]
    delays: DelayProfile
    residuals: tuple[float, ...]
    throttled: bool
    policy: str
    baseline: tuple[float, ...]


def _fixed_point(reach: float, factor: float, phi: float, start: float, damping=0.5, tol=1e-10, max_iter=10_000):
    """Solve d = n(d)/phi with n(d) = factor * (reach - d) / t folded into ``factor``."""
    d = start
    for _ in range(max_iter):
        g = factor * (reach - d) / phi
        res = d - g
        if abs(res) <= tol:
            return d, abs(res)
        d = (1 - damping) * d + damping * g
    g = factor * (reach - d) / phi
    raise ConvergenceError("capacity fixed point did not converge", abs(d - g))


def capacity_reallocation(params: MarketParams, cps: Sequence[CPProfile], target: int, d_target: float,
                          policy: str = "proportional", capacity_scale: float = 1.0) -> CapacityPlan:
    """Give ``target`` delay ``d_target`` by moving existing capacity to it.

    Delays follow reservation-style queues, d_j = n_j / capacity_j. Baseline
    capacities serve every CP at d0; what the target needs is taken from the
    others in proportion to their baseline shares, and their delays rise to the
    matching fixed points.
    """
    check_cps(params, cps)
    if policy != "proportional":
        raise MarketError(f"unknown capacity policy {policy!r}")
    if not 0 < d_target <= params.d0:
        raise MarketError("d_target must lie in (0, d0]")
    M, d0, t = params.M, params.d0, params.t
    S = eq._fees(cps)
    reach = params.V - S / params.theta          # tau_j(d) = (reach_j - d) / t
    factor = np.where((np.arange(M) == 0) | (np.arange(M) == M - 1), 1.0, 2.0) / t
    n_default = factor * (reach - d0)
    if np.any(n_default <= 0):
        raise InfeasibleError("a CP has no users at the default delay")
    base = n_default / d0
    total = float(base.sum()) * capacity_scale

    ti = target - 1
    n_t = factor[ti] * (reach[ti] - d_target)
    if n_t <= 0:
        raise InfeasibleError(f"CP {target} has no users at d = {d_target}")
    phi_t = n_t / d_target
    rest = total - phi_t
    if rest <= 0:
        raise InfeasibleError("target allocation exhausts total capacity")

    others = [k for k in range(M) if k != ti]
    share = base[others] / base[others].sum()
    alloc = np.empty(M)
    alloc[ti] = phi_t
    for k, s in zip(others[:-1], share[:-1]):
        alloc[k] = rest * s
    # last share takes the remainder; nudge it by ulps until the (correctly
    # rounded) sum reproduces the total exactly
    last = others[-1]
    alloc[last] = total - math.fsum(alloc[k] for k in [ti] + others[:-1])
    for _ in range(8):
        gap = math.fsum(alloc) - total
        if gap == 0:
            break
        alloc[last] = np.nextafter(alloc[last], -np.inf if gap > 0 else np.inf)

    d = np.empty(M)
    res = np.zeros(M)
    d[ti] = d_target
    res[ti] = abs(d_target - n_t / phi_t)
    for k in others:
        dk, rk = _fixed_point(reach[k], factor[k], alloc[k], d0)
        if not 0 < dk < reach[k]:
            raise InfeasibleError(f"CP {k + 1}: capacity fixed point {dk:.6g} outside (0, V - S/theta)")
        d[k], res[k] = dk, rk

    profile = DelayProfile(tuple(d), allow_throttling=True)
    return CapacityPlan(total, tuple(float(a) for a in alloc), profile, tuple(float(v) for v in res),
                        profile.is_throttled(params), policy, tuple(float(b) * capacity_scale for b in base))
