"""Kernel backend selection.

The compiled extension is preferred when importable; otherwise the NumPy
implementation takes over transparently. ``set_backend`` exists so the
benchmark and equivalence tests can pin one side explicitly.
"""

from . import _kernels_py

try:
    from . import _kernels  # type: ignore[attr-defined]

    HAS_COMPILED = True
except ImportError:  # pragma: no cover - depends on the build
    _kernels = None
    HAS_COMPILED = False

_active = _kernels if HAS_COMPILED else _kernels_py


def active_backend() -> str:
    """Name of the backend currently serving kernel calls."""
    return "compiled" if _active is _kernels and HAS_COMPILED else "python"


def set_backend(name: str) -> None:
    """Pin the kernel backend; name is 'compiled' or 'python'."""
    global _active
    if name == "python":
        _active = _kernels_py
    elif name == "compiled":
        if not HAS_COMPILED:
            raise RuntimeError("compiled kernels are not available in this build")
        _active = _kernels
    else:
        raise ValueError(f"unknown backend {name!r}; expected 'compiled' or 'python'")


def connection(c, g):
    return _active.connection(c, g)


def ricci_raw(c, g):
    return _active.ricci_raw(c, g)


def curvature_core(c, g):
    return _active.curvature_core(c, g)
