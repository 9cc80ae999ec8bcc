"""Numba dispatch.

Hot kernels exist twice: a numba-compiled version and a plain numpy version.
Setting SURFACEWALK_NO_NUMBA=1 (or having no numba installed) selects the
numpy versions everywhere.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None


def numba_enabled():
    flag = os.environ.get("SURFACEWALK_NO_NUMBA", "").strip().lower()
    return numba is not None and flag in ("", "0", "false", "no")


def njit(*args, **kwargs):
    """numba.njit when numba is importable, identity otherwise.

    Compilation is lazy, so decorating costs nothing when the numpy path is
    selected at runtime.
    """
    kwargs.setdefault("cache", True)
    if numba is None:  # pragma: no cover
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda f: f
    return numba.njit(*args, **kwargs)


def pick(nb_impl, np_impl, use_numba=None):
    if use_numba is None:
        use_numba = numba_enabled()
    return nb_impl if use_numba else np_impl
