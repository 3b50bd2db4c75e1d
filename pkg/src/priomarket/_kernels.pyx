# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled user-scan kernel.

Must stay operation-for-operation identical to ``_fallback.scan_users`` so both
paths choose the same bundle at every grid point.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def scan_users(const double[::1] xs, const double[::1] pos, const double[::1] a,
               const double[::1] b, double t, double theta_t, double F, double tie_tol):
    cdef Py_ssize_t n = xs.shape[0]
    cdef Py_ssize_t m = pos.shape[0]
    cdef Py_ssize_t i, j, k, bj, bk
    cdef double x, u, best, cut, scale
    cdef cnp.ndarray[cnp.int64_t, ndim=1] prim_arr = np.empty(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] sec_arr = np.empty(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] util_arr = np.empty(n, dtype=np.float64)
    cdef cnp.int64_t[::1] prim = prim_arr
    cdef cnp.int64_t[::1] sec = sec_arr
    cdef double[::1] util = util_arr
    cdef double[::1] pu = np.empty(m, dtype=np.float64)
    cdef double[::1] qu = np.empty(m, dtype=np.float64)

    with nogil:
        for i in range(n):
            x = xs[i]
            for j in range(m):
                pu[j] = a[j] - t * fabs(x - pos[j])
                qu[j] = b[j] - theta_t * fabs(x - pos[j])
            best = pu[0] - F
            for j in range(m):
                u = pu[j] - F
                if u > best:
                    best = u
                for k in range(m):
                    if k != j:
                        u = (pu[j] + qu[k]) - F
                        if u > best:
                            best = u
            if best < 0:
                prim[i] = -1
                sec[i] = -1
                util[i] = 0.0
                continue
            scale = fabs(best)
            if scale < 1.0:
                scale = 1.0
            cut = best - tie_tol * scale
            bj = -1
            bk = -1
            for j in range(m):
                u = pu[j] - F
                if u >= cut:
                    bj = j
                    bk = -1
                    break
                for k in range(m):
                    if k != j:
                        u = (pu[j] + qu[k]) - F
                        if u >= cut:
                            bj = j
                            bk = k
                            break
                if bj >= 0:
                    break
            prim[i] = bj
            sec[i] = bk
            util[i] = u
    return prim_arr, sec_arr, util_arr
