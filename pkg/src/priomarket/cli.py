"""Command-line front end.

Exit codes: 0 success, 2 bad scenario, 3 infeasible or non-converged solve,
4 oracle mismatch beyond tolerance.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import equilibrium as eq
from . import optimizer as op
from .model import MarketError, RegimeError, validate_assumptions
from .oracle import oracle_report
from .scenario import ScenarioError, default_scenario, load_scenario
from .sweeps import RECIPES, ResultRow, SweepOptions, emit_csv, run_sweep, to_csv
from .welfare import total_welfare_closed, total_welfare_numeric

EXIT_OK, EXIT_SCENARIO, EXIT_SOLVER, EXIT_ORACLE = 0, 2, 3, 4


def _scenario(args):
    return load_scenario(args.scenario) if args.scenario else default_scenario()


def _write(rows, args):
    if args.out:
        emit_csv(rows, args.out)
    else:
        sys.stdout.write(to_csv(rows))


def _masses(sc, delays, allow):
    mode = sc.mode
    if mode == "auto":
        mode = op.solve_mode(sc.params, sc.cps)
    if sc.distribution is not None and mode == "multi":
        return eq.masses_nonuniform(sc.params, sc.cps, delays, sc.distribution, allow_throttling=allow)
    if mode == "single":
        return eq.masses_single(sc.params, sc.cps, delays, force=True, allow_throttling=allow)
    if mode == "all_dual":
        return eq.masses_all_dual(sc.params, sc.cps, delays, force=True, allow_throttling=allow)
    return eq.masses_multi(sc.params, sc.cps, delays, allow_throttling=allow)


def cmd_validate(args) -> int:
    sc = _scenario(args)
    rep = validate_assumptions(sc.params, sc.cps)
    out = {"id": sc.id, "regime": rep.regime.value, "part1_ok": rep.part1_ok,
           "part2_lower_ok": rep.part2_lower_ok, "part2_upper_ok": rep.part2_upper_ok,
           "margins": {k: (None if not np.isfinite(v) else v) for k, v in rep.margins.items()},
           "degenerate": list(rep.degenerate)}
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_equilibrium(args) -> int:
    sc = _scenario(args)
    d = np.asarray(sc.delays if sc.delays is not None else np.full(sc.params.M, sc.params.d0))
    m = _masses(sc, d, args.allow_throttling)
    p = np.zeros(sc.params.M)
    regime = validate_assumptions(sc.params, sc.cps).regime
    rev = eq.cp_revenues(sc.params, sc.cps, m, p)
    row = ResultRow(sc.id, {}, regime.value, tuple(d), tuple(p), tuple(m.n), tuple(m.n1), tuple(m.n2),
                    tuple(rev), eq.isp_profit(sc.params, sc.cps, m, p, d, sc.cost))
    row.welfare_closed = total_welfare_closed(sc.params, sc.cps, d).total
    _write([row], args)
    return EXIT_OK


def cmd_optimize(args) -> int:
    sc = _scenario(args)
    out = op.solve_market(sc.params, sc.cps, sc.cost, mode=sc.mode, exclusive=args.exclusive,
                          throttle=sc.throttle, dist=sc.distribution, seed=args.seed)
    m = out.masses
    row = ResultRow(sc.id, {}, out.regime.value, tuple(out.delays), tuple(out.prices), tuple(m.n),
                    tuple(m.n1), tuple(m.n2), tuple(out.revenues), out.profit, meta=out.meta)
    row.welfare_closed = total_welfare_closed(sc.params, sc.cps, out.delays).total
    _write([row], args)
    return EXIT_OK


def cmd_sweep(args) -> int:
    sc = _scenario(args) if args.recipe == "custom" else None
    opts = SweepOptions(grid=args.grid, numeric_welfare=not args.no_numeric, oracle=args.oracle,
                        exclusive=args.exclusive, seed=args.seed)
    rows = run_sweep(args.recipe, sc, opts)
    _write(rows, args)
    return EXIT_OK


def cmd_oracle(args) -> int:
    sc = _scenario(args)
    d = np.asarray(sc.delays if sc.delays is not None else np.full(sc.params.M, sc.params.d0))
    analytic = _masses(sc, d, args.allow_throttling)
    rep = oracle_report(sc.params, sc.cps, analytic, d, args.grid, args.tol)
    print(json.dumps({"id": sc.id, "N": rep.N, "max_error": rep.max_error, "tol": rep.tol,
                      "passed": rep.passed, "adjacency_violations": rep.violations,
                      "err_n": rep.err_n.tolist(), "err_n1": rep.err_n1.tolist(),
                      "err_n2": rep.err_n2.tolist()}, indent=2))
    return EXIT_OK if rep.passed else EXIT_ORACLE


def cmd_welfare(args) -> int:
    sc = _scenario(args)
    d = sc.delays
    closed = total_welfare_closed(sc.params, sc.cps, d)
    numeric = total_welfare_numeric(sc.params, sc.cps, d, args.grid)
    print(json.dumps({"id": sc.id, "closed": closed.total, "numeric": numeric.total,
                      "closed_segments": list(closed.segments), "numeric_segments": list(numeric.segments),
                      "includes_access_fee": False}, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="priomarket", description="Paid-prioritization market simulator")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", metavar="PATH", help="scenario JSON (default: bundled calibration)")
    common.add_argument("--out", metavar="PATH", help="write CSV here instead of stdout")
    common.add_argument("--grid", type=int, default=100001, metavar="N", help="oracle / integration users")
    common.add_argument("--tol", type=float, default=None, metavar="X", help="oracle tolerance")
    common.add_argument("--exclusive", action="store_true", help="offer a fast lane to one CP only")
    common.add_argument("--allow-throttling", action="store_true", help="accept delays above d0")
    common.add_argument("--seed", type=int, default=0, metavar="K", help="seed for random restarts")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="classify the scenario's regime").set_defaults(fn=cmd_validate)
    sub.add_parser("equilibrium", parents=[common], help="masses and revenues at the scenario's delays").set_defaults(fn=cmd_equilibrium)
    sub.add_parser("optimize", parents=[common], help="solve the ISP's offers").set_defaults(fn=cmd_optimize)
    sw = sub.add_parser("sweep", parents=[common], help="run a named recipe or the scenario's sweep")
    sw.add_argument("recipe", choices=RECIPES)
    sw.add_argument("--oracle", action="store_true", help="add the oracle's max mass error per row")
    sw.add_argument("--no-numeric", action="store_true", help="skip numeric welfare")
    sw.set_defaults(fn=cmd_sweep)
    sub.add_parser("oracle", parents=[common], help="brute-force check of the closed-form masses").set_defaults(fn=cmd_oracle)
    sub.add_parser("welfare", parents=[common], help="closed-form and numeric welfare").set_defaults(fn=cmd_welfare)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ScenarioError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SCENARIO
    except (op.InfeasibleError, op.ConvergenceError, eq.NegativeMassError, RegimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SOLVER
    except MarketError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SCENARIO


if __name__ == "__main__":
    sys.exit(main())
