"""Trajectory-kernel backend selection.

The compiled extension is preferred when importable; the pure-Python
backend is a drop-in replacement (same inputs, same algorithm, ~100x
slower). ``EVSR_BACKEND=python|cython`` overrides auto-selection.
"""

import os

from . import _pykernel

try:
    from . import _core
    _HAVE_CORE = True
except ImportError:
    _core = None
    _HAVE_CORE = False


def available_backends() -> tuple[str, ...]:
    return ("cython", "python") if _HAVE_CORE else ("python",)


def get_backend(name: str = "auto"):
    """Return the kernel module named ``name`` (or the best available)."""
    if name == "auto":
        name = os.environ.get("EVSR_BACKEND", "auto")
    if name == "auto":
        return _core if _HAVE_CORE else _pykernel
    if name == "cython":
        if not _HAVE_CORE:
            raise RuntimeError("compiled kernel not available; build the extension "
                               "or use backend='python'")
        return _core
    if name == "python":
        return _pykernel
    raise ValueError(f"unknown backend {name!r}; expected auto, cython or python")
