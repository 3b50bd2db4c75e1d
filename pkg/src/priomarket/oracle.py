"""Brute-force check of the closed forms: a fine grid of users, each picking its
best bundle over every CP and every CP pair."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .equilibrium import MassBreakdown
from .model import TIE_TOL, CPProfile, MarketError, MarketParams, as_delays, check_cps, cp_positions

MIN_GRID = 10001


@dataclass(frozen=True)
class UserScan:
    """Per-user choices on the grid x_i = i/(N-1); CP indices are 0-based, -1 for none."""

    xs: np.ndarray
    primary: np.ndarray
    secondary: np.ndarray
    utility: np.ndarray


def grid(N: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, N)


def scan(params: MarketParams, cps: Sequence[CPProfile], delays=None, N: int = 100001, *,
         allow_throttling: bool = True, backend: str | None = None) -> UserScan:
    check_cps(params, cps)
    if N < 2:
        raise MarketError("need at least two grid users")
    d = as_delays(params, delays, allow_throttling)
    S = np.array([cp.S for cp in cps], dtype=float)
    xs = grid(N)
    a = params.V - d - S
    b = params.theta * (params.V - d) - S
    pos = cp_positions(params.M)
    p, s, u = kernels.scan_users(xs, pos, a, b, params.t, params.theta * params.t, params.F, TIE_TOL, backend=backend)
    return UserScan(xs, p, s, u)


@dataclass(frozen=True)
class Simulation:
    masses: MassBreakdown
    welfare: float
    opt_out: float
    N: int


def tally(M: int, sc: UserScan) -> MassBreakdown:
    N = sc.xs.size
    n1 = np.bincount(sc.primary[sc.primary >= 0], minlength=M) / N
    n2 = np.bincount(sc.secondary[sc.secondary >= 0], minlength=M) / N
    return MassBreakdown(n1 + n2, n1, n2)


def simulate_users(params: MarketParams, cps: Sequence[CPProfile], delays=None, N: int = 100001, *,
                   allow_throttling: bool = True, backend: str | None = None) -> Simulation:
    """Empirical masses on an odd, symmetric grid of ``N`` users of mass 1/N each.

    Welfare is the mean realized utility with the access fee added back.
    """
    if N < MIN_GRID or N % 2 == 0:
        raise MarketError(f"oracle grid must be odd and at least {MIN_GRID}, got {N}")
    sc = scan(params, cps, delays, N, allow_throttling=allow_throttling, backend=backend)
    joined = sc.primary >= 0
    welfare = float(np.sum(sc.utility + params.F * joined) / N)
    return Simulation(tally(params.M, sc), welfare, float(np.mean(~joined)), N)


@dataclass(frozen=True)
class OracleReport:
    empirical: MassBreakdown
    err_n: np.ndarray
    err_n1: np.ndarray
    err_n2: np.ndarray
    max_error: float
    tol: float
    passed: bool
    violations: int = 0
    N: int | None = None


def default_tol(N: int | None) -> float:
    return 1e-3 if N is None else max(1e-3, 10.0 / N)


def compare_masses(analytic: MassBreakdown, empirical: MassBreakdown, tol: float | None = None,
                   N: int | None = None, violations: int = 0) -> OracleReport:
    if len(analytic) != len(empirical):
        raise MarketError(f"CP count mismatch: {len(analytic)} vs {len(empirical)}")
    tol = default_tol(N) if tol is None else tol
    en = np.abs(analytic.n - empirical.n)
    e1 = np.abs(analytic.n1 - empirical.n1)
    e2 = np.abs(analytic.n2 - empirical.n2)
    worst = float(max(en.max(), e1.max(), e2.max()))
    return OracleReport(empirical, en, e1, e2, worst, tol, worst <= tol, violations, N)


def nearest_two_mask(xs: np.ndarray, M: int) -> np.ndarray:
    """Boolean (N, M) table: CP k is among the two nearest CPs of user i (ties included)."""
    dist = np.abs(xs[:, None] - cp_positions(M)[None, :])
    second = np.sort(dist, axis=1)[:, 1]
    return dist <= second[:, None] + 1e-12


def count_violations(M: int, sc: UserScan) -> int:
    ok = nearest_two_mask(sc.xs, M)
    rows = np.arange(sc.xs.size)
    bad = np.zeros(sc.xs.size, dtype=bool)
    for col in (sc.primary, sc.secondary):
        used = col >= 0
        bad[used] |= ~ok[rows[used], col[used]]
    return int(bad.sum())


def adjacency_check(params: MarketParams, cps: Sequence[CPProfile], delays=None, N: int = 100001,
                    backend: str | None = None) -> int:
    """Users whose best bundle touches a CP other than their two nearest."""
    sc = scan(params, cps, delays, N, backend=backend)
    return count_violations(params.M, sc)


def oracle_report(params: MarketParams, cps: Sequence[CPProfile], analytic: MassBreakdown, delays=None,
                  N: int = 100001, tol: float | None = None, backend: str | None = None) -> OracleReport:
    """One scan, masses compared and adjacency counted."""
    if N < MIN_GRID or N % 2 == 0:
        raise MarketError(f"oracle grid must be odd and at least {MIN_GRID}, got {N}")
    sc = scan(params, cps, delays, N, backend=backend)
    return compare_masses(analytic, tally(params.M, sc), tol, N, count_violations(params.M, sc))
