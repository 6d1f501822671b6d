"""Backend selection for the hot kernels.

Set ``NLHD_BACKEND=numpy`` to force the pure-numpy path. Any other value (or
unset) uses numba when it can be imported.
"""
import os

BACKEND_ENV = "NLHD_BACKEND"

try:
    import numba
    from numba import njit, prange

    HAS_NUMBA = True
    # the system TBB is too old for numba; skip probing it
    if "NUMBA_THREADING_LAYER_PRIORITY" not in os.environ:
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn

    prange = range


def _env_wants_numpy():
    return os.environ.get(BACKEND_ENV, "").strip().lower() in ("numpy", "python", "0", "off")


USE_NUMBA = HAS_NUMBA and not _env_wants_numpy()


def backend_name():
    return "numba" if USE_NUMBA else "numpy"


def set_threads(n):
    """Set the worker count used by parallel kernels; returns the count in effect.

    Requests above the numba pool size (``NUMBA_NUM_THREADS``) are clamped.
    """
    if n is None or n < 1:
        raise ValueError(f"thread count must be >= 1, got {n!r}")
    if not HAS_NUMBA:
        return 1
    n = min(int(n), numba.config.NUMBA_NUM_THREADS)
    numba.set_num_threads(n)
    return n


def get_threads():
    if not HAS_NUMBA:
        return 1
    return numba.get_num_threads()
