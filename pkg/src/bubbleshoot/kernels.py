"""Backend selection for the integration kernel.

The compiled extension is used when it was built; otherwise the pure-Python
module with the same interface is loaded.  Setting ``BUBBLESHOOT_KERNEL`` to
``python`` forces the fallback.
"""

import os

from . import _kernels_py

_forced = os.environ.get("BUBBLESHOOT_KERNEL", "").strip().lower()

if _forced == "python":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        if _forced == "cython":
            raise
        _impl = _kernels_py

integrate = _impl.integrate
BACKEND = _impl.BACKEND

ST_CROSSED = _kernels_py.ST_CROSSED
ST_REACHED_STOP = _kernels_py.ST_REACHED_STOP
ST_MAX_STEPS = _kernels_py.ST_MAX_STEPS
ST_CAP = _kernels_py.ST_CAP
ST_NOT_MONOTONE = _kernels_py.ST_NOT_MONOTONE
ST_STEP_UNDERFLOW = _kernels_py.ST_STEP_UNDERFLOW


def available_backends():
    """Names of the kernels importable in this environment."""
    names = ["python"]
    try:
        from . import _kernels  # noqa: F401

        names.insert(0, "cython")
    except ImportError:
        pass
    return names


def get_backend(name):
    """The ``integrate`` function of a named backend."""
    if name == "python":
        return _kernels_py.integrate
    if name == "cython":
        from . import _kernels

        return _kernels.integrate
    raise ValueError(f"unknown kernel backend {name!r}")
