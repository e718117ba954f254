"""Kernel backend selection.

The stepping kernel exists twice: a compiled Cython extension
(spiralwell._kernel) and a pure-Python twin (spiralwell._kernel_py) with
identical semantics and bit-identical output.  The compiled one is chosen
when importable; set SPIRALWELL_BACKEND=python or =compiled to force a
choice (forcing `compiled` raises if the extension is missing).
"""

from __future__ import annotations

import os

from . import _kernel_py

_FORCE = os.environ.get("SPIRALWELL_BACKEND", "auto").strip().lower()

if _FORCE not in ("auto", "python", "compiled"):
    raise RuntimeError(
        f"SPIRALWELL_BACKEND must be auto, python, or compiled; got {_FORCE!r}")

if _FORCE == "python":
    kernel = _kernel_py
else:
    try:
        from . import _kernel as _compiled
        kernel = _compiled
    except ImportError:
        if _FORCE == "compiled":
            raise RuntimeError(
                "SPIRALWELL_BACKEND=compiled but the extension is not built; "
                "reinstall with a C compiler available")
        kernel = _kernel_py

BACKEND = kernel.BACKEND


def available_backends() -> list[str]:
    names = ["python"]
    try:
        from . import _kernel  # noqa: F401
        names.insert(0, "compiled")
    except ImportError:
        pass
    return names


def get_kernel(name: str | None = None):
    """Kernel module by name; None gives the active default."""
    if name is None:
        return kernel
    if name == "python":
        return _kernel_py
    if name == "compiled":
        from . import _kernel as _compiled
        return _compiled
    raise ValueError(f"unknown backend {name!r}")
