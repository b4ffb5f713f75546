"""Backend selection for the ADMM iteration loop.

The compiled Cython kernel is used when the extension built; the NumPy
fallback implements the identical recursion.  Override with the environment
variable ``CWSS_BACKEND=cython|python`` or per call via the ``backend``
argument of the solver entry points.
"""

from __future__ import annotations

import os

from . import _admm_py

try:
    from . import _admm as _admm_ext
except ImportError:  # pragma: no cover - build-dependent
    _admm_ext = None

_NAMES = ("cython", "python")


def available_backends() -> tuple[str, ...]:
    return _NAMES if _admm_ext is not None else ("python",)


def default_backend() -> str:
    forced = os.environ.get("CWSS_BACKEND")
    if forced:
        if forced not in _NAMES:
            raise ValueError(f"CWSS_BACKEND must be one of {_NAMES}, got {forced!r}")
        if forced == "cython" and _admm_ext is None:
            raise RuntimeError("CWSS_BACKEND=cython but the compiled kernel is not available")
        return forced
    return "cython" if _admm_ext is not None else "python"


def get_loop(backend: str | None = None):
    name = backend or default_backend()
    if name == "cython":
        if _admm_ext is None:
            raise RuntimeError("compiled kernel not available; rebuild or use backend='python'")
        return _admm_ext.admm_loop
    if name == "python":
        return _admm_py.admm_loop
    raise ValueError(f"unknown backend {name!r}")
