"""Select the ring kernel backend at import time.

The compiled Cython module is used when it was built; otherwise the numpy
implementation. Set ``LATERAL_OVM_BACKEND=python`` to force the fallback.
"""
import os

from . import _ring_py

_requested = os.environ.get("LATERAL_OVM_BACKEND", "").strip().lower()

try:
    from . import _ring as _compiled
except ImportError:  # extension not built
    _compiled = None

if _requested == "cython" and _compiled is None:
    raise ImportError("LATERAL_OVM_BACKEND=cython but lateral_ovm._ring is not built")

if _compiled is not None and _requested != "python":
    impl, BACKEND = _compiled, "cython"
else:
    impl, BACKEND = _ring_py, "python"

MODES = {"nearest": 0, "paired": 1}
GATES = {"dynamic": 0, "open": 1, "closed": 2}
SCHEMES = {"euler": 0, "rk4": 1}
STATUS = {0: "ok", 1: "non-finite state", 2: "collision (headway <= 0)", 3: "overtaking (ordering violated)"}


def available() -> list[str]:
    return ["cython", "python"] if _compiled is not None else ["python"]


def get(name: str | None = None):
    """Kernel module by name; ``None`` gives the import-time selection."""
    if name is None:
        return impl
    if name == "python":
        return _ring_py
    if name == "cython":
        if _compiled is None:
            raise ValueError("compiled backend is not available")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")
