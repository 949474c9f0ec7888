"""Kernel backend selection.

The compiled Cython backend is used when available; the pure-numpy reference
implementation is the fallback. Set ``MYOLINK_PURE_PYTHON=1`` to force the
fallback, or call :func:`set_backend` (mainly for benchmarks and tests).
"""

import os

from . import reference

_BACKENDS = {"reference": reference}

try:  # compiled extension is optional at runtime
    from . import _speedups

    _BACKENDS["compiled"] = _speedups
except ImportError:  # pragma: no cover - depends on the build
    _speedups = None

if os.environ.get("MYOLINK_PURE_PYTHON"):
    _active = reference
else:
    _active = _speedups if _speedups is not None else reference


def impl():
    """The active kernel module."""
    return _active


def active_backend() -> str:
    return _active.BACKEND_NAME


def available_backends():
    return sorted(_BACKENDS)


def set_backend(name: str):
    """Switch kernels; returns the previous backend name."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; available: {available_backends()}")
    previous = _active.BACKEND_NAME
    _active = _BACKENDS[name]
    return previous
