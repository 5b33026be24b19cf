"""Optional numba acceleration.

Set ``SESSIONCK_DISABLE_NUMBA=1`` to run every kernel as plain Python over
numpy arrays. The compiled and interpreted paths execute the same source.
"""

import os

DISABLED = os.environ.get("SESSIONCK_DISABLE_NUMBA", "").strip() not in ("", "0")

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

ENABLED = numba is not None and not DISABLED


def njit(fn):
    """Compile ``fn`` with numba when enabled, otherwise return it unchanged."""
    if ENABLED:
        return numba.njit(cache=True)(fn)
    return fn
