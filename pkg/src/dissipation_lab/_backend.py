"""Backend selection for the hot loops.

The numba path is used when numba imports and ``DISSLAB_BACKEND`` is not set to
``numpy``.  Every kernel in :mod:`dissipation_lab._kernels` has a pure-numpy twin
so results can be cross-checked and the package still runs without numba.
"""
import contextlib
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

HAVE_NUMBA = numba is not None
_state = {"backend": "numba" if HAVE_NUMBA else "numpy"}

_env = os.environ.get("DISSLAB_BACKEND", "").strip().lower()
if _env in ("numpy", "python", "0", "off"):
    _state["backend"] = "numpy"


def njit(fn):
    if HAVE_NUMBA:
        return numba.njit(cache=True)(fn)
    return fn


def backend():
    return _state["backend"]


def set_backend(name):
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    _state["backend"] = name


@contextlib.contextmanager
def use_backend(name):
    old = _state["backend"]
    set_backend(name)
    try:
        yield
    finally:
        _state["backend"] = old
