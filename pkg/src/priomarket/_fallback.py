"""Pure numpy version of the user-scan kernel (used when the extension is absent)."""

import numpy as np


def scan_users(xs, pos, a, b, t, theta_t, F, tie_tol, chunk=8192):
    """Best bundle for every user position in ``xs``.

    Returns (primary, secondary, utility) arrays. CP indices are 0-based,
    -1 marks "none" (secondary) or opt-out (primary). Candidates are ordered
    primary-ascending with Single(j) ahead of Dual(j, k), k ascending; the
    first one within ``tie_tol`` of the best wins.
    """
    xs = np.ascontiguousarray(xs, dtype=float)
    m = len(pos)
    n = len(xs)
    # candidate table in canonical order: (j, -1), (j, k != j)...
    cj, ck = [], []
    for j in range(m):
        cj.append(j)
        ck.append(-1)
        for k in range(m):
            if k != j:
                cj.append(j)
                ck.append(k)
    cj = np.array(cj)
    ck = np.array(ck)
    dual = ck >= 0
    ck_safe = np.where(dual, ck, 0)

    prim = np.empty(n, dtype=np.int64)
    sec = np.empty(n, dtype=np.int64)
    util = np.empty(n, dtype=float)
    for lo in range(0, n, chunk):
        x = xs[lo:lo + chunk, None]
        dist = np.abs(x - pos[None, :])
        pu = a[None, :] - t * dist
        qu = b[None, :] - theta_t * dist
        u = np.where(dual[None, :], pu[:, cj] + qu[:, ck_safe], pu[:, cj])
        u = u - F
        best = u.max(axis=1)
        cut = best - tie_tol * np.maximum(np.abs(best), 1.0)
        pick = np.argmax(u >= cut[:, None], axis=1)
        rows = np.arange(len(x))
        out = best < 0
        prim[lo:lo + chunk] = np.where(out, -1, cj[pick])
        sec[lo:lo + chunk] = np.where(out, -1, ck[pick])
        util[lo:lo + chunk] = np.where(out, 0.0, u[rows, pick])
    return prim, sec, util
