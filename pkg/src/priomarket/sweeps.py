"""Experiment sweeps and CSV output.

Named recipes regenerate the data behind each experiment figure from the
bundled calibration; ``custom`` sweeps whatever the scenario file asks for.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import equilibrium as eq
from . import optimizer as op
from .costs import ReciprocalCost
from .model import CPProfile, MarketError, MarketParams, validate_assumptions
from .oracle import oracle_report
from .scenario import Scenario, default_scenario
from .welfare import total_welfare_closed, total_welfare_numeric

SIG = 12
RECIPES = ("fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "fig10", "fig11", "custom")


@dataclass
class ResultRow:
    scenario: str
    swept: dict
    regime: str = ""
    d: tuple = ()
    p: tuple = ()
    n: tuple = ()
    n1: tuple = ()
    n2: tuple = ()
    R: tuple = ()
    profit: float = math.nan
    welfare_closed: float = math.nan
    welfare_numeric: float = math.nan
    oracle_error: float | None = None
    extra: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    error: str = ""


@dataclass(frozen=True)
class SweepOptions:
    grid: int = 100001       # users for numeric welfare and the oracle
    numeric_welfare: bool = True
    oracle: bool = False
    exclusive: bool = False
    seed: int = 0
    threads: int | None = None


def _threads(opts: SweepOptions) -> int:
    cap = os.environ.get("PRIO_MARKET_THREADS")
    n = opts.threads or (int(cap) if cap else (os.cpu_count() or 1))
    return max(1, n)


def parallel_map(fn, items, opts: SweepOptions):
    """Order-preserving map; threads help because the kernel drops the GIL."""
    items = list(items)
    n = min(_threads(opts), len(items)) or 1
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(n) as pool:
        return list(pool.map(fn, items))


def _row_from_outcome(sc_id, swept, params, cps, out: eq.EquilibriumOutcome, opts,
                      extra=None, meta=None) -> ResultRow:
    m = out.masses
    row = ResultRow(sc_id, dict(swept), out.regime.value, tuple(out.delays), tuple(out.prices),
                    tuple(m.n), tuple(m.n1), tuple(m.n2), tuple(out.revenues), out.profit,
                    extra=dict(extra or {}), meta={**out.meta, **(meta or {})})
    row.welfare_closed = total_welfare_closed(params, cps, out.delays).total
    if opts.numeric_welfare:
        row.welfare_numeric = total_welfare_numeric(params, cps, out.delays, opts.grid).total
    if opts.oracle:
        row.oracle_error = oracle_report(params, cps, m, out.delays, opts.grid).max_error
    return row


def _guard(fn, sc_id, swept):
    """Run one sweep point; infeasible points become error rows."""
    try:
        return fn()
    except MarketError as e:
        return ResultRow(sc_id, dict(swept), error=f"{type(e).__name__}: {e}")


def _outcome_at(params, cps, cost, delays, prices, mode="multi", throttled=False):
    d = np.asarray(delays, dtype=float)
    p = np.asarray(prices, dtype=float)
    if mode == "single":
        m = eq.masses_single(params, cps, d, force=True, allow_throttling=throttled)
    else:
        m = eq.masses_multi(params, cps, d, allow_throttling=throttled)
    return eq.EquilibriumOutcome(d, p, m, eq.cp_revenues(params, cps, m, p),
                                 eq.isp_profit(params, cps, m, p, d, cost, z=p > 0),
                                 validate_assumptions(params, cps).regime, mode)


# ---------------------------------------------------------------------------
# recipes


def _base() -> Scenario:
    return default_scenario()


def _fig34(c: float, opts: SweepOptions, name: str):
    sc = _base()
    cost = ReciprocalCost(c)
    S_vals = np.linspace(6, 16, 21)
    r_vals = np.linspace(1, 4, 16)
    pts = [(S, r) for S in S_vals for r in r_vals]

    def run(pt):
        S, r = pt
        swept = {"S": S, "r": r}

        def go():
            cps = [CPProfile(j + 1, S, r) for j in range(sc.params.M)]
            out = op.solve_market(sc.params, cps, cost, mode="multi", exclusive=opts.exclusive)
            cp = cps[2]
            aff = op.affordability_check(sc.params, cp, cost)
            extra = {"d_star": out.delays[2], "p_star": out.prices[2],
                     "d_analytic": op.analytic_delay(sc.params, cp, cost),
                     "affordable": int(aff.affordable), "afford_margin": aff.margin}
            return _row_from_outcome(name, swept, sc.params, cps, out, opts, extra=extra, meta={"cost_c": c})
        return _guard(go, name, swept)

    return parallel_map(run, pts, opts)


def _fig5(opts: SweepOptions):
    """Welfare change from prioritization: both of CP1/CP2, CP2 alone, and CP2
    alone with every other CP throttled to 1.01 d0."""
    sc = _base()
    cost = ReciprocalCost(2.0)
    params = sc.params
    M, d0 = params.M, params.d0
    throttle = 1.01

    def run(pt):
        S, curve = pt
        swept = {"S": S, "curve": curve}

        def go():
            fees = [6.0] * M
            fees[1] = S
            if curve == "both":
                fees[0] = S
            cps = [CPProfile(j + 1, fees[j], 2.27) for j in range(M)]
            targets = (0, 1) if curve == "both" else (1,)
            # every CP without a fast lane sits in the (possibly throttled) default lane
            d = np.full(M, throttle * d0 if curve == "one_throttled" else d0)
            p = np.zeros(M)
            for k in targets:
                o = op.make_offer(params, cps[k], cost)
                if o.accepted:
                    d[k], p[k] = o.d_star, o.p_star
            out = _outcome_at(params, cps, cost, d, p, throttled=curve == "one_throttled")
            row = _row_from_outcome("fig5", swept, params, cps, out, opts, meta={"throttle": throttle, "cost_c": 2.0})
            base_c = total_welfare_closed(params, cps, None).total
            row.extra["welfare_delta_closed"] = row.welfare_closed - base_c
            if opts.numeric_welfare:
                base_n = total_welfare_numeric(params, cps, None, opts.grid).total
                row.extra["welfare_delta_numeric"] = row.welfare_numeric - base_n
            return row
        return _guard(go, "fig5", swept)

    pts = [(S, c) for S in np.linspace(10, 16, 13) for c in ("both", "one", "one_throttled")]
    return parallel_map(run, pts, opts)


def _fig6(opts: SweepOptions):
    """ISP gain from selling fast lanes as the default delay worsens."""
    sc = _base()
    cost = ReciprocalCost(1.0)
    pts = [(S, d0) for S in (6.0, 10.0, 16.0) for d0 in np.linspace(5.4, 7.3, 20)]

    def run(pt):
        S, d0 = pt
        swept = {"S": S, "d0": d0}

        def go():
            params = replace(sc.params, d0=d0)
            cps = [CPProfile(j + 1, S, 2.27) for j in range(params.M)]
            out = op.solve_market(params, cps, cost, mode="multi", exclusive=opts.exclusive)
            return _row_from_outcome("fig6", swept, params, cps, out, opts, extra={"isp_gain": out.profit - params.F})
        return _guard(go, "fig6", swept)

    return parallel_map(run, pts, opts)


def _menu(name: str, pts, opts: SweepOptions):
    sc = _base()
    cost = ReciprocalCost(1.0)
    params = sc.params

    def run(pt):
        S3, r3 = pt
        swept = {"S_3": S3, "r_3": r3}

        def go():
            cps = [CPProfile(j + 1, 10.0, 2.27) for j in range(params.M)]
            cps[2] = CPProfile(3, S3, r3)
            menu = op.uniform_menu_optimize(params, cps, cost)
            offers = op.optimize_offers(params, cps, cost)
            disc = sum(op.offer_profit(params, cps, o, cost) for o in offers)
            extra = {"menu_d": menu.d, "menu_p": menu.p, "accepted": ";".join(map(str, menu.accepted)),
                     "menu_profit": menu.profit, "discriminatory_profit": disc}
            return _row_from_outcome(name, swept, params, cps, menu.outcome, opts, extra=extra, meta=menu.meta)
        return _guard(go, name, swept)

    return parallel_map(run, pts, opts)


def _capacity(name: str, S3: float, opts: SweepOptions):
    sc = _base()
    cost = ReciprocalCost(1.0)
    params = sc.params

    def run(dt):
        swept = {"S_3": S3, "d_3": dt}

        def go():
            cps = [CPProfile(j + 1, 10.0, 2.27) for j in range(params.M)]
            cps[2] = CPProfile(3, S3, 2.27)
            plan = op.capacity_reallocation(params, cps, 3, dt)
            d = np.array(plan.delays.d)
            out = _outcome_at(params, cps, cost, d, np.zeros(params.M), throttled=True)
            base = total_welfare_closed(params, cps, None).total
            extra = {"capacity": plan.total, "max_residual": max(plan.residuals),
                     "throttled": int(plan.throttled)}
            row = _row_from_outcome(name, swept, params, cps, out, opts, extra=extra, meta={"policy": plan.policy})
            row.extra["welfare_delta_closed"] = row.welfare_closed - base
            return row
        return _guard(go, name, swept)

    return parallel_map(run, np.linspace(4, 6, 21), opts)


def _custom(sc: Scenario, opts: SweepOptions):
    pts = list(sc.points())

    def run(item):
        swept, s = item

        def go():
            out = op.solve_market(s.params, s.cps, s.cost, mode=s.mode, exclusive=opts.exclusive,
                                  throttle=s.throttle, dist=s.distribution, seed=opts.seed)
            return _row_from_outcome(s.id, swept, s.params, s.cps, out, opts)
        return _guard(go, sc.id, swept)

    return parallel_map(run, pts, opts)


def run_sweep(command: str, scenario: Scenario | None = None, opts: SweepOptions | None = None) -> list[ResultRow]:
    opts = opts or SweepOptions()
    if command == "fig3":
        return _fig34(1.0, opts, "fig3")
    if command == "fig4":
        return _fig34(2.0, opts, "fig4")
    if command == "fig5":
        return _fig5(opts)
    if command == "fig6":
        return _fig6(opts)
    if command == "fig7":
        return _menu("fig7", [(S, 4.0) for S in np.linspace(12, 18, 13)], opts)
    if command == "fig8":
        return _menu("fig8", [(18.0, r) for r in np.linspace(2, 4, 9)], opts)
    if command in ("fig9", "fig10", "fig11"):
        return _capacity(command, {"fig9": 10.0, "fig10": 13.0, "fig11": 16.0}[command], opts)
    if command == "custom":
        if scenario is None:
            raise MarketError("custom sweep needs a scenario")
        return _custom(scenario, opts)
    raise MarketError(f"unknown sweep command {command!r}; choose from {', '.join(RECIPES)}")


# ---------------------------------------------------------------------------
# CSV


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return ""
    return format(v, f".{SIG}g")


def columns(rows: list[ResultRow]) -> list[str]:
    M = max((len(r.d) for r in rows), default=0)
    swept = []
    extra = []
    for r in rows:
        for k in r.swept:
            if k not in swept:
                swept.append(k)
        for k in r.extra:
            if k not in extra:
                extra.append(k)
    cols = ["scenario", *swept, "regime"]
    for name in ("d", "p", "n", "n1", "n2", "R"):
        cols += [f"{name}_{j}" for j in range(1, M + 1)]
    cols += ["profit", "welfare_closed", "welfare_numeric"]
    if any(r.oracle_error is not None for r in rows):
        cols.append("oracle_max_error")
    return cols + extra + ["error"]


def row_values(r: ResultRow, cols: list[str]) -> list[str]:
    vals = {"scenario": r.scenario, "regime": r.regime, "profit": r.profit,
            "welfare_closed": r.welfare_closed, "welfare_numeric": r.welfare_numeric,
            "oracle_max_error": r.oracle_error, "error": r.error}
    vals.update(r.swept)
    vals.update(r.extra)
    for name in ("d", "p", "n", "n1", "n2", "R"):
        for j, v in enumerate(getattr(r, name), start=1):
            vals[f"{name}_{j}"] = v
    if r.error:
        # numeric columns stay empty on failed points
        keep = {"scenario", "error", *r.swept}
        vals = {k: v for k, v in vals.items() if k in keep}
    return [_fmt(vals.get(c)) for c in cols]


def to_csv(rows: list[ResultRow]) -> str:
    if not rows:
        raise MarketError("no rows to write")
    cols = columns(rows)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(cols)
    for r in rows:
        w.writerow(row_values(r, cols))
    return buf.getvalue()


def emit_csv(rows: list[ResultRow], path) -> Path:
    path = Path(path)
    text = to_csv(rows)
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as e:
        raise MarketError(f"cannot write {path}: {e.strerror}") from None
    return path
