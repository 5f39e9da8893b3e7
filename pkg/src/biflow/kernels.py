"""Backend selection for the hot kernels.

The compiled extension is used when importable; set ``BIFLOW_BACKEND=python``
to force the numpy fallback.  ``BIFLOW_THREADS`` caps OpenMP threads used by
the Green's-function sum (each target is reduced serially, so results do
not depend on the thread count).
"""
import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def available_backends():
    return ["python"] + (["cython"] if _ckernels is not None else [])


def get_backend(name=None):
    name = name or os.environ.get("BIFLOW_BACKEND", "auto")
    if name == "python":
        return _pykernels
    if name in ("cython", "auto"):
        if _ckernels is not None:
            return _ckernels
        if name == "cython":
            raise ImportError("compiled kernels are not built; reinstall with Cython available")
        return _pykernels
    raise ValueError(f"unknown kernel backend {name!r}")


def thread_count():
    try:
        return max(1, int(os.environ.get("BIFLOW_THREADS", "1")))
    except ValueError:
        return 1


backend = get_backend()
BACKEND = backend.NAME
