"""Selects the compiled user-scan kernel, falling back to numpy.

Set ``PRIO_MARKET_PURE=1`` to force the numpy path.
"""

import os

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

if os.environ.get("PRIO_MARKET_PURE", "") not in ("", "0"):
    _compiled = None

BACKEND = "cython" if _compiled is not None else "numpy"


def scan_users(xs, pos, a, b, t, theta_t, F, tie_tol, backend=None):
    """Dispatch to the selected backend; ``backend`` may force "cython" or "numpy"."""
    which = backend or BACKEND
    if which == "cython":
        if _compiled is None:
            raise RuntimeError("compiled kernel not available")
        return _compiled.scan_users(xs, pos, a, b, float(t), float(theta_t), float(F), float(tie_tol))
    if which == "numpy":
        return _fallback.scan_users(xs, pos, a, b, t, theta_t, F, tie_tol)
    raise ValueError(f"unknown backend {which!r}")


def compiled_available() -> bool:
    return _compiled is not None
