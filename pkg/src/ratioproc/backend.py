"""Kernel backend selection.

Hot inner loops live in :mod:`ratioproc.kernels`.  Each loop kernel has a
single source implementation; when numba is available (and not disabled) it
is JIT compiled, otherwise the plain Python/NumPy path runs.

Selection is controlled by the environment variable ``RATIOPROC_NUMBA``:

* unset or ``auto`` -- use numba if it imports,
* ``1`` / ``true``  -- require numba (fall back with a warning if missing),
* ``0`` / ``false`` -- force the pure NumPy/Python path.

``benchmarks/bench_kernels.py`` compares the two paths.
"""

from __future__ import annotations

import os
import warnings

_FLAG = os.environ.get("RATIOPROC_NUMBA", "auto").strip().lower()

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via RATIOPROC_NUMBA=0
    numba = None
    _HAVE_NUMBA = False

if _FLAG in ("auto", ""):
    USE_NUMBA = _HAVE_NUMBA
elif _FLAG in ("1", "true", "yes", "on"):
    if not _HAVE_NUMBA:
        warnings.warn("RATIOPROC_NUMBA=1 but numba is not importable; using the NumPy path")
    USE_NUMBA = _HAVE_NUMBA
elif _FLAG in ("0", "false", "no", "off"):
    USE_NUMBA = False
else:
    warnings.warn(f"unrecognized RATIOPROC_NUMBA={_FLAG!r}; using auto")
    USE_NUMBA = _HAVE_NUMBA


def maybe_njit(*args, **kwargs):
    """``numba.njit`` when the numba backend is active, identity otherwise."""
    kwargs.setdefault("cache", True)
    if not USE_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda func: func
    if args and callable(args[0]):
        return numba.njit(args[0], **kwargs)
    return numba.njit(*args, **kwargs)


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
