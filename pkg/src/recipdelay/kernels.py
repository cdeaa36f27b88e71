"""Backend selection for the hot ADMM/Weiszfeld loops.

The compiled extension is used when it was built; otherwise the numpy
implementation is. Set ``RECIPDELAY_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

python_backend = _kernels_py

if os.environ.get("RECIPDELAY_PURE_PYTHON", "") not in ("", "0"):
    compiled_backend = None
else:
    try:
        from . import _kernels_ext as compiled_backend
    except ImportError:
        compiled_backend = None

active = compiled_backend if compiled_backend is not None else python_backend
BACKEND: str = active.BACKEND


def get_backend(name: str | None = None):
    """Return the kernel module by name ('python', 'cython'), or the active one."""
    if name is None:
        return active
    if name == "python":
        return python_backend
    if name == "cython":
        if compiled_backend is None:
            raise RuntimeError("compiled kernels are not available in this install")
        return compiled_backend
    raise ValueError(f"unknown backend {name!r}")
