"""Backend selection for the numba-accelerated kernels.

Every hot kernel in the package has two implementations: a numba ``@njit``
version and a pure-numpy fallback. The numba path is used when numba imports
cleanly and the environment variable ``MATLIGHT_PURE_NUMPY`` is unset (or
"0"/"false"). ``benchmarks/bench_kernels.py`` times the two paths against
each other.

``MATLIGHT_WORKERS`` caps the number of threads used by parallel kernels.
"""

import os

__all__ = ["NUMBA_ENABLED", "HAVE_NUMBA", "njit", "prange", "worker_count"]


def _flag_set(name: str) -> bool:
    return os.environ.get(name, "0").strip().lower() not in ("", "0", "false", "no")


try:
    import numba
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def deco(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return deco

    prange = range

NUMBA_ENABLED = HAVE_NUMBA and not _flag_set("MATLIGHT_PURE_NUMPY")


def worker_count() -> int:
    """Worker count for parallel kernels, from MATLIGHT_WORKERS (default 1)."""
    try:
        n = int(os.environ.get("MATLIGHT_WORKERS", "1"))
    except ValueError:
        n = 1
    return max(1, n)


if NUMBA_ENABLED:
    try:
        numba.set_num_threads(min(worker_count(), numba.config.NUMBA_NUM_THREADS))
    except ValueError:  # pragma: no cover - requested more threads than exist
        pass
