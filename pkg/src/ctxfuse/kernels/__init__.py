"""Hot numeric kernels with a compiled backend and a NumPy fallback.

The compiled extension is used when it was built; set ``CTXFUSE_PURE=1`` to
force the NumPy backend. ``use()`` switches backends at runtime.
"""
import os

from . import _pure

try:
    if os.environ.get("CTXFUSE_PURE"):
        raise ImportError("compiled kernels disabled by CTXFUSE_PURE")
    from . import _ckernels
except ImportError:
    _ckernels = None

BACKENDS = {"pure": _pure}
if _ckernels is not None:
    BACKENDS["compiled"] = _ckernels

_active = _ckernels if _ckernels is not None else _pure


def backend() -> str:
    return "compiled" if _active is _ckernels and _ckernels is not None else "pure"


def use(name: str) -> None:
    global _active
    if name not in BACKENDS:
        raise ValueError(f"kernel backend {name!r} unavailable; have {sorted(BACKENDS)}")
    _active = BACKENDS[name]


def filter_rows(x, idx, w):
    return _active.filter_rows(x, idx, w)


def box_sum(a, size: int):
    return _active.box_sum(a, size)


def majority3(labels):
    return _active.majority3(labels)
