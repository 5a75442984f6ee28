"""Selects the likelihood-kernel implementation at import time.

The compiled Cython core is preferred; the pure-numpy twin is used when the
extension is unavailable.  Set ``TOMO_KERNEL=python`` (or ``cython``) to
force a choice; forcing an unavailable backend raises at first use.
"""

from __future__ import annotations

import os
from contextlib import contextmanager

from . import _kernels_py
from .errors import ContractError

try:
    from . import _kernels as _kernels_cy
except ImportError:
    _kernels_cy = None

_BACKENDS = {"python": _kernels_py}
if _kernels_cy is not None:
    _BACKENDS["cython"] = _kernels_cy


def _initial():
    forced = os.environ.get("TOMO_KERNEL")
    if forced:
        if forced not in _BACKENDS:
            raise ContractError(
                f"TOMO_KERNEL={forced!r} is not available; choices: {sorted(_BACKENDS)}"
            )
        return _BACKENDS[forced]
    return _BACKENDS.get("cython", _kernels_py)


_active = _initial()


def active():
    """The kernel module currently in use."""
    return _active


def backend_name() -> str:
    return _active.BACKEND_NAME


def available_backends() -> dict:
    return dict(_BACKENDS)


@contextmanager
def override(name: str):
    """Temporarily switch kernels; used by parity tests and benchmarks."""
    global _active
    if name not in _BACKENDS:
        raise ContractError(f"backend {name!r} is not available; choices: {sorted(_BACKENDS)}")
    previous = _active
    _active = _BACKENDS[name]
    try:
        yield _active
    finally:
        _active = previous
