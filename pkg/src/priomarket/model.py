"""Market primitives: parameters, CP geometry, user utilities and bundle choice.

Users sit on the unit line, CPs at equally spaced points. A user buys nothing,
a single CP, or an ordered (primary, secondary) pair. Everything here is a pure
function of immutable inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np


class MarketError(ValueError):
    """Base class for invalid inputs to the market model."""


class ThrottlingError(MarketError):
    pass


class RegimeError(MarketError):
    pass


# Relative tolerance used to call two bundle utilities tied.
TIE_TOL = 1e-12


@dataclass(frozen=True)
class MarketParams:
    V: float
    t: float
    theta: float
    delta: float
    lam: float
    F: float
    M: int
    d0: float

    def __post_init__(self):
        # JSON hands over ints; integer arrays built from them would truncate delays
        for name in ("V", "t", "theta", "delta", "lam", "F", "d0"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not self.t > 0:
            raise MarketError("t must be > 0")
        # theta == 0 is the single-purchase special case
        if not 0 <= self.theta < 1:
            raise MarketError("theta must lie in [0, 1)")
        if not 0 <= self.delta <= 1:
            raise MarketError("delta must lie in [0, 1]")
        if not self.lam > 0:
            raise MarketError("lambda must be > 0")
        if int(self.M) != self.M or self.M < 3:
            raise MarketError("M must be an integer >= 3")
        if not self.d0 > 0:
            raise MarketError("d0 must be > 0")
        if not self.F >= 0:
            raise MarketError("F must be >= 0")
        if not self.V > 0:
            raise MarketError("V must be > 0")
        object.__setattr__(self, "M", int(self.M))

    @property
    def spacing(self) -> float:
        """Distance between adjacent CPs, 1/(M-1)."""
        return 1.0 / (self.M - 1)


@dataclass(frozen=True)
class CPProfile:
    j: int
    S: float
    r: float
    z: int = 0

    def __post_init__(self):
        object.__setattr__(self, "S", float(self.S))
        object.__setattr__(self, "r", float(self.r))
        if self.S < 0:
            raise MarketError(f"CP {self.j}: S must be >= 0")
        if self.r < 0:
            raise MarketError(f"CP {self.j}: r must be >= 0")
        if self.z not in (0, 1):
            raise MarketError(f"CP {self.j}: z must be 0 or 1")


@dataclass(frozen=True)
class DelayProfile:
    """Per-CP delays, stored in CP order (index 0 is CP 1)."""

    d: tuple[float, ...]
    allow_throttling: bool = False

    def __post_init__(self):
        object.__setattr__(self, "d", tuple(float(v) for v in self.d))
        for k, v in enumerate(self.d, start=1):
            if not v > 0:
                raise MarketError(f"delay of CP {k} must be > 0, got {v}")

    def __getitem__(self, j: int) -> float:
        return self.d[j - 1]

    def __len__(self) -> int:
        return len(self.d)

    @property
    def values(self) -> np.ndarray:
        return np.array(self.d, dtype=float)

    @classmethod
    def default(cls, params: MarketParams) -> "DelayProfile":
        return cls((params.d0,) * params.M)

    def replace(self, j: int, value: float) -> "DelayProfile":
        d = list(self.d)
        d[j - 1] = value
        return DelayProfile(tuple(d), self.allow_throttling)

    def is_throttled(self, params: MarketParams) -> bool:
        return any(v > params.d0 * (1 + 1e-12) for v in self.d)


class Bundle:
    """A user's consumption choice: opt out, one CP, or an ordered CP pair."""

    __slots__ = ("primary", "secondary")

    def __init__(self, primary: int | None = None, secondary: int | None = None):
        if primary is None and secondary is not None:
            raise MarketError("a secondary CP needs a primary")
        if secondary is not None and secondary == primary:
            raise MarketError("primary and secondary CP must differ")
        self.primary = primary
        self.secondary = secondary

    @classmethod
    def opt_out(cls) -> "Bundle":
        return cls()

    @classmethod
    def single(cls, j: int) -> "Bundle":
        return cls(j)

    @classmethod
    def dual(cls, j: int, k: int) -> "Bundle":
        return cls(j, k)

    @property
    def is_opt_out(self) -> bool:
        return self.primary is None

    @property
    def is_dual(self) -> bool:
        return self.secondary is not None

    def cps(self) -> tuple[int, ...]:
        return tuple(c for c in (self.primary, self.secondary) if c is not None)

    def __eq__(self, other):
        if not isinstance(other, Bundle):
            return NotImplemented
        return (self.primary, self.secondary) == (other.primary, other.secondary)

    def __hash__(self):
        return hash((self.primary, self.secondary))

    def __repr__(self):
        if self.is_opt_out:
            return "OptOut"
        if not self.is_dual:
            return f"Single({self.primary})"
        return f"Dual({self.primary},{self.secondary})"


class Regime(str, Enum):
    FULL = "FullAssumption1"
    NO_DUAL = "NoDual"
    ALL_DUAL = "AllDual"
    PARTIAL = "PartialCoverage"
    DEGENERATE = "Degenerate"


@dataclass(frozen=True)
class AssumptionReport:
    part1_ok: bool
    part2_lower_ok: bool
    part2_upper_ok: bool
    regime: Regime
    margins: dict = field(default_factory=dict)
    # bounds whose denominator was <= 0
    degenerate: tuple[str, ...] = ()


# ---------------------------------------------------------------------------
# helpers


def make_cps(S: float | Sequence[float], r: float | Sequence[float], M: int | None = None) -> list[CPProfile]:
    """Build a contiguous CP list from scalars or per-CP sequences."""
    if M is None:
        for v in (S, r):
            if not np.isscalar(v):
                M = len(v)
                break
        else:
            raise MarketError("M is required when S and r are both scalars")
    S_vals = [float(S)] * M if np.isscalar(S) else [float(v) for v in S]
    r_vals = [float(r)] * M if np.isscalar(r) else [float(v) for v in r]
    if len(S_vals) != M or len(r_vals) != M:
        raise MarketError("S and r must have M entries")
    return [CPProfile(j + 1, S_vals[j], r_vals[j]) for j in range(M)]


def calibration_params(**overrides) -> MarketParams:
    """Calibrated streaming-market parameters used throughout the experiments."""
    base = dict(V=100.0, t=500.0, theta=0.5, delta=0.5, lam=5.0, F=33.0, M=6, d0=6.0)
    base.update(overrides)
    return MarketParams(**base)


def calibration_cps(M: int = 6, S: float = 10.0, r: float = 2.27) -> list[CPProfile]:
    return make_cps(S, r, M)


def check_cps(params: MarketParams, cps: Sequence[CPProfile]) -> None:
    if len(cps) != params.M:
        raise MarketError(f"expected {params.M} CPs, got {len(cps)}")
    for k, cp in enumerate(cps, start=1):
        if cp.j != k:
            raise MarketError(f"CP indices must run 1..M in order; position {k} has index {cp.j}")


def as_delays(params: MarketParams, delays, allow_throttling: bool = False) -> np.ndarray:
    """Validate a delay profile against ``params`` and return it as an array.

    Accepts a DelayProfile, a sequence of M floats, or None (all defaults).
    """
    if delays is None:
        return np.full(params.M, params.d0)
    if isinstance(delays, DelayProfile):
        allow_throttling = allow_throttling or delays.allow_throttling
        arr = delays.values
    else:
        arr = np.asarray(delays, dtype=float)
    if arr.shape != (params.M,):
        raise MarketError(f"delay profile must have {params.M} entries")
    if np.any(~(arr > 0)):
        raise MarketError("delays must be > 0")
    if not allow_throttling and np.any(arr > params.d0 * (1 + 1e-12)):
        bad = int(np.argmax(arr > params.d0 * (1 + 1e-12))) + 1
        raise ThrottlingError(f"CP {bad} delay exceeds d0; pass allow_throttling=True to permit throttling")
    return arr


def cp_position(j: int, M: int) -> float:
    if M < 2:
        raise MarketError("need at least two CPs")
    if not 1 <= j <= M:
        raise MarketError(f"CP index {j} outside 1..{M}")
    return (j - 1) / (M - 1)


def cp_positions(M: int) -> np.ndarray:
    return np.arange(M) / (M - 1)


def thresholds(params: MarketParams, cp: CPProfile, d_j: float) -> tuple[float, float]:
    """Primary and secondary reach of a CP: the farthest distance at which a
    user still gains from it as primary (tauP) or as secondary (tauS)."""
    if params.theta == 0:
        raise RegimeError("theta = 0: secondary threshold undefined, use the single-purchase solver")
    tau_p = (params.V - d_j - cp.S) / params.t
    tau_s = (params.V - d_j - cp.S / params.theta) / params.t
    return tau_p, tau_s


def secondary_reach(params: MarketParams, cps: Sequence[CPProfile], delays) -> np.ndarray:
    """Vector of secondary thresholds tau_j(d_j) for all CPs."""
    if params.theta == 0:
        raise RegimeError("theta = 0: secondary threshold undefined, use the single-purchase solver")
    d = np.asarray(delays, dtype=float)
    S = np.array([cp.S for cp in cps])
    return (params.V - d - S / params.theta) / params.t


def bundle_utility(x: float, bundle: Bundle, params: MarketParams, cps: Sequence[CPProfile], delays) -> float:
    if bundle.is_opt_out:
        return 0.0
    d = as_delays(params, delays, allow_throttling=True)
    j = bundle.primary
    u = params.V - params.t * abs(x - cp_position(j, params.M)) - d[j - 1] - cps[j - 1].S
    if bundle.is_dual:
        k = bundle.secondary
        u += params.theta * (params.V - params.t * abs(x - cp_position(k, params.M)) - d[k - 1]) - cps[k - 1].S
    return u - params.F


def _candidates(x: float, M: int, candidate_set: str) -> list[int]:
    if candidate_set == "all":
        return list(range(1, M + 1))
    if candidate_set == "adjacent":
        seg = min(int(x * (M - 1)), M - 2)
        return [seg + 1, seg + 2]
    raise MarketError(f"unknown candidate set {candidate_set!r}")


def best_bundle(x: float, params: MarketParams, cps: Sequence[CPProfile], delays, candidate_set: str = "all") -> Bundle:
    """Utility-maximizing bundle of a user at ``x``.

    Candidates are scanned primary-ascending, Single(j) before Dual(j, k); the
    first candidate within TIE_TOL of the maximum wins. OptOut when the best
    utility is negative.
    """
    d = as_delays(params, delays, allow_throttling=True)
    idx = _candidates(x, params.M, candidate_set)
    order: list[Bundle] = []
    for j in idx:
        order.append(Bundle.single(j))
        order.extend(Bundle.dual(j, k) for k in idx if k != j)
    utils = [bundle_utility(x, b, params, cps, d) for b in order]
    best = max(utils)
    if best < 0:
        return Bundle.opt_out()
    cut = best - TIE_TOL * max(1.0, abs(best))
    for b, u in zip(order, utils):
        if u >= cut:
            return b
    raise AssertionError("unreachable")


def nearest_two(x: float, M: int) -> set[int]:
    """CPs at most as far from ``x`` as its second-nearest CP."""
    dist = np.abs(x - cp_positions(M))
    second = np.partition(dist, 1)[1]
    return {k + 1 for k in np.flatnonzero(dist <= second + 1e-12)}


# ---------------------------------------------------------------------------
# Assumption validation


def _bound(num: float, den: float):
    """num/den with the degenerate-denominator convention.

    Returns (value, degenerate). A nonpositive denominator gives +inf when the
    numerator is positive; otherwise the bound is unusable (nan, degenerate).
    """
    if den > 0:
        return num / den, False
    if num > 0:
        return math.inf, True
    return math.nan, True


def validate_assumptions(params: MarketParams, cps: Sequence[CPProfile]) -> AssumptionReport:
    check_cps(params, cps)
    V, t, d0, F, th = params.V, params.t, params.d0, params.F, params.theta
    L = params.spacing
    S = [cp.S for cp in cps]
    Smax, Smin = max(S), min(S)

    margins: dict[str, float] = {}
    degenerate: list[str] = []

    coverage_need = d0 + t * L + F + Smax
    part1 = V > coverage_need
    margins["part1"] = V - coverage_need

    lower, deg_l = _bound(Smax, V - d0 - 0.5 * (Smax + t * L))
    upper, deg_u = _bound(Smin, V - t * L)
    if deg_l:
        degenerate.append("part2_lower")
    if deg_u:
        degenerate.append("part2_upper")
    lower_ok = (not math.isnan(lower)) and th > lower
    upper_ok = (not math.isnan(upper)) and th < upper
    margins["part2_lower"] = th - lower if not math.isnan(lower) else math.nan
    margins["part2_upper"] = upper - th if not math.isnan(upper) else math.nan

    # extremes where no user or every user buys two CPs, at the default delay
    no_dual_cut = min(_bound(s, V - 0.5 * t * L - d0)[0] for s in S)
    all_dual_cut = max(_bound(s, V - d0 - t * L)[0] for s in S)
    margins["no_dual"] = no_dual_cut - th if not math.isnan(no_dual_cut) else math.nan
    margins["all_dual"] = th - all_dual_cut if not math.isnan(all_dual_cut) else math.nan

    if th == 0 or (not math.isnan(no_dual_cut) and th < no_dual_cut):
        regime = Regime.NO_DUAL
    elif not part1:
        regime = Regime.PARTIAL
    elif lower_ok and upper_ok:
        regime = Regime.FULL
    elif not math.isnan(all_dual_cut) and th > all_dual_cut:
        regime = Regime.ALL_DUAL
    else:
        # a part-2 bound fails without reaching either extreme, or is unusable
        regime = Regime.DEGENERATE

    return AssumptionReport(part1, lower_ok, upper_ok, regime, margins, tuple(degenerate))


def is_full(params: MarketParams, cps: Iterable[CPProfile]) -> bool:
    return validate_assumptions(params, list(cps)).regime is Regime.FULL
