"""Selection of the compiled or pure-Python core.

The compiled extension is used when it imports; ``NETREC_BACKEND=python``
forces the fallback and ``NETREC_BACKEND=cython`` makes a missing extension
an error.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _core_py

__all__ = ["get_backend", "set_backend", "available_backends", "backend_name"]


def _load_compiled() -> ModuleType | None:
    try:
        from . import _core  # type: ignore[attr-defined]
    except ImportError:
        return None
    return _core


_compiled = _load_compiled()
_active: ModuleType


def available_backends() -> list[str]:
    return (["cython"] if _compiled is not None else []) + ["python"]


def set_backend(name: str) -> ModuleType:
    """Switch the process-wide backend (``"cython"``, ``"python"`` or ``"auto"``)."""
    global _active
    if name == "auto":
        _active = _compiled if _compiled is not None else _core_py
    elif name == "cython":
        if _compiled is None:
            raise ImportError("compiled extension netrec._core is not built")
        _active = _compiled
    elif name == "python":
        _active = _core_py
    else:
        raise ValueError(f"unknown backend {name!r}; choose cython, python or auto")
    return _active


def get_backend(name: str | None = None) -> ModuleType:
    """The active backend, or a specific one by name without switching."""
    if name is None:
        return _active
    if name == "python":
        return _core_py
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled extension netrec._core is not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}; choose cython or python")


def backend_name() -> str:
    return _active.NAME


set_backend(os.environ.get("NETREC_BACKEND", "auto"))
