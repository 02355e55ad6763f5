"""Kernel backend selection.

The hot loops ship in two functionally equivalent forms: numba ``@njit``
scalar loops and vectorized pure-numpy implementations.  The numba form is
used when numba imports cleanly, unless ``GEOSMOOTH_NO_NUMBA`` is set to a
truthy value, in which case the numpy form is selected.  ``benchmarks/``
contains a script comparing the two.
"""

import os

DISABLE_ENV = "GEOSMOOTH_NO_NUMBA"


def _env_disabled() -> bool:
    return os.environ.get(DISABLE_ENV, "").strip().lower() in ("1", "true", "yes", "on")


try:
    if _env_disabled():
        raise ImportError("numba disabled via " + DISABLE_ENV)
    from numba import njit

    NUMBA_ENABLED = True
except ImportError:  # pragma: no cover - exercised via env flag in tests
    NUMBA_ENABLED = False

    def njit(*args, **kwargs):
        raise RuntimeError("numba backend unavailable")


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
