"""User welfare: a per-segment closed form and a numerical integral of realized
utilities. The access fee is left out of both; only deltas are compared."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import CPProfile, MarketError, MarketParams, as_delays, check_cps, cp_positions
from .oracle import scan

MIN_N = 1001


@dataclass(frozen=True)
class WelfareReport:
    total: float
    segments: tuple[float, ...]
    method: str
    includes_access_fee: bool = False


def _tau(params, cp, d):
    return (params.V - d - cp.S / params.theta) / params.t


def segment_welfare_closed(params: MarketParams, cps: Sequence[CPProfile], j: int, d_j: float, d_next: float) -> float:
    """Welfare of users between CP ``j`` and CP ``j+1``.

    The constant inside the first bracket is kept as t/(2(M-1)); it does not
    depend on delays, so deltas are unaffected.
    """
    if not 1 <= j < params.M:
        raise MarketError(f"segment index must be in 1..{params.M - 1}")
    L, t, th = params.spacing, params.t, params.theta
    primary = L * (params.V - 0.5 * (d_j + d_next) - t / (2 * (params.M - 1))) + (d_next - d_j) ** 2 / (4 * t)
    tj = _tau(params, cps[j - 1], d_j)
    tk = _tau(params, cps[j], d_next)
    return (1 - th) * primary + th * 0.5 * t * (tj * tj + tk * tk)


def total_welfare_closed(params: MarketParams, cps: Sequence[CPProfile], delays=None, *,
                         allow_throttling: bool = True) -> WelfareReport:
    check_cps(params, cps)
    d = as_delays(params, delays, allow_throttling)
    segs = tuple(segment_welfare_closed(params, cps, j, d[j - 1], d[j]) for j in range(1, params.M))
    return WelfareReport(math.fsum(segs), segs, "closed")


def total_welfare_numeric(params: MarketParams, cps: Sequence[CPProfile], delays=None, N: int = 100001, *,
                          allow_throttling: bool = True, backend: str | None = None) -> WelfareReport:
    """Trapezoid rule over ``N`` evenly spaced users; opt-outs contribute zero."""
    if N < MIN_N:
        raise MarketError(f"integration grid must have at least {MIN_N} points")
    sc = scan(params, cps, delays, N, allow_throttling=allow_throttling, backend=backend)
    w = sc.utility + params.F * (sc.primary >= 0)
    h = 1.0 / (N - 1)
    piece = 0.5 * h * (w[:-1] + w[1:])
    mids = 0.5 * (sc.xs[:-1] + sc.xs[1:])
    # each interval goes to the segment holding its midpoint
    seg = np.clip(np.searchsorted(cp_positions(params.M), mids, side="right") - 1, 0, params.M - 2)
    segs = tuple(math.fsum(piece[seg == k]) for k in range(params.M - 1))
    return WelfareReport(math.fsum(segs), segs, "numeric")


def welfare(params, cps, delays=None, method: str = "closed", N: int = 100001, **kw) -> WelfareReport:
    if method == "closed":
        return total_welfare_closed(params, cps, delays, **kw)
    if method == "numeric":
        return total_welfare_numeric(params, cps, delays, N, **kw)
    raise MarketError(f"unknown welfare method {method!r}")


def welfare_delta(params: MarketParams, cps: Sequence[CPProfile], pre_delays, post_delays,
                  method: str = "closed", N: int = 100001, **kw) -> float:
    """Welfare after minus welfare before."""
    post = welfare(params, cps, post_delays, method, N, **kw).total
    pre = welfare(params, cps, pre_delays, method, N, **kw).total
    return post - pre
