"""Bounded scalar minimization: coarse grid seed, then golden-section refinement."""

from __future__ import annotations

import math

import numpy as np

INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, lo, hi, tol, max_iter=500):
    """Minimize unimodal ``f`` on [lo, hi]; returns (x, f(x)).

    Endpoints are kept as candidates, so a minimum on the boundary is returned
    exactly. Ties go to the upper endpoint.
    """
    a, b = lo, hi
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INVPHI * (b - a)
            fd = f(d)
    x, fx = (c, fc) if fc < fd else (d, fd)
    f_lo, f_hi = f(lo), f(hi)
    if f_hi <= fx and f_hi <= f_lo:
        return hi, f_hi
    if f_lo < fx:
        return lo, f_lo
    return x, fx


def grid_golden(f, lo, hi, n_grid=256, rel_tol=1e-10):
    """Seed with ``n_grid`` evenly spaced samples, then refine around the best.

    Used for objectives that are unimodal in practice but carry no convexity
    guarantee. Ties on the grid prefer the larger argument.
    """
    xs = np.linspace(lo, hi, n_grid)
    vals = np.array([f(x) for x in xs])
    best = np.flatnonzero(vals == vals.min())[-1]
    a = xs[max(best - 1, 0)]
    b = xs[min(best + 1, n_grid - 1)]
    x, fx = golden_section(f, a, b, rel_tol * max(abs(hi), 1.0))
    if vals[best] < fx:
        return float(xs[best]), float(vals[best])
    return float(x), float(fx)


def newton_polish(f, x, lo, hi, h=None, steps=3):
    """Refine an interior minimizer with finite-difference Newton steps.

    Golden section stalls near sqrt(machine eps) on flat minima. The slope is a
    Richardson-extrapolated central difference (fourth order), so a fairly wide
    step keeps round-off small without biasing the root. Steps that leave
    [lo, hi], meet nonpositive curvature or raise f beyond round-off are rejected.
    """
    h = 1e-3 * (hi - lo) if h is None else h
    fx = f(x)
    for _ in range(steps):
        if x - h <= lo or x + h >= hi:
            break
        fm, fp = f(x - h), f(x + h)
        fm2, fp2 = f(x - 0.5 * h), f(x + 0.5 * h)
        curv = (fp - 2 * fx + fm) / (h * h)
        if not curv > 0:
            break
        slope = (4 * (fp2 - fm2) / h - (fp - fm) / (2 * h)) / 3
        xn = x - slope / curv
        if not lo < xn < hi:
            break
        fn = f(xn)
        if fn > fx + 1e-13 * max(1.0, abs(fx)):
            break
        x, fx = xn, fn
    return x, fx
