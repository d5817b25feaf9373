"""Switch between numba-compiled kernels and the pure-numpy fallbacks.

Set ``CFEXTRACT_DISABLE_NUMBA=1`` (or numba's own ``NUMBA_DISABLE_JIT=1``)
to force the numpy path. Both paths are always importable so tests can
compare them directly.
"""

import os

_FALSY = ("", "0", "false", "no", "off")


def _flag(name):
    return os.environ.get(name, "").strip().lower() not in _FALSY


try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not (
    _flag("CFEXTRACT_DISABLE_NUMBA") or _flag("NUMBA_DISABLE_JIT")
)

NUMBA_OPTS = {"cache": False, "nogil": True}


def njit(fn):
    """Compile ``fn`` with numba when available, else return it unchanged."""
    if not HAVE_NUMBA:
        return fn
    return numba.njit(**NUMBA_OPTS)(fn)
