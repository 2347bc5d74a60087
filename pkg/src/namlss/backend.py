"""Kernel backend selection.

Hot numeric kernels in :mod:`namlss.kernels` are written once, in
numba-compatible numpy, and compiled with ``@numba.njit`` when the numba
lane is active.  The lane is chosen at import time:

* ``NAMLSS_BACKEND=numpy``  forces the pure-numpy fallback,
* ``NAMLSS_BACKEND=numba``  forces numba (ImportError if unavailable),
* unset: numba when importable, numpy otherwise.

``benchmarks/bench_backends.py`` compares both lanes in subprocesses.
"""

import os

_ENV_VAR = "NAMLSS_BACKEND"
_requested = os.environ.get(_ENV_VAR, "").strip().lower()

if _requested not in ("", "numba", "numpy"):
    raise RuntimeError(
        f"{_ENV_VAR} must be 'numba' or 'numpy', got {_requested!r}"
    )

if _requested == "numpy":
    _njit = None
elif _requested == "numba":
    import numba

    _njit = numba.njit
else:
    try:
        import numba

        _njit = numba.njit
    except ImportError:
        _njit = None

#: Name of the active lane, "numba" or "numpy".
BACKEND = "numba" if _njit is not None else "numpy"


def kernel(fn):
    """Decorator for hot kernels: njit-compile on the numba lane, no-op otherwise.

    Compiled kernels are cached on disk so repeated processes skip the
    JIT cost.  Kernels may call each other; on the numba lane the module
    globals they resolve to are themselves compiled, which numba accepts.
    """
    if _njit is None:
        return fn
    return _njit(cache=True)(fn)
