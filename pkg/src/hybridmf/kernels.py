"""Kernel backend selection.

The compiled Cython module is used when it was built; otherwise the NumPy
fallback is used. ``HYBRIDMF_BACKEND=python`` forces the fallback at import.
"""

import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    _BACKENDS["cython"] = _compiled

_active = _BACKENDS.get(os.environ.get("HYBRIDMF_BACKEND", "cython"), _kernels_py)


def available() -> list[str]:
    return sorted(_BACKENDS)


def backend() -> str:
    return "cython" if _active is _compiled else "python"


def use(name: str) -> None:
    global _active
    try:
        _active = _BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} not available (have {available()})") from None


def active():
    return _active
