"""Kernel backend selection.

The compiled extension is preferred when importable; the numpy fallback is
always available.  Set SPINQUENCH_KERNELS=numpy (or =cython) to force a
backend, e.g. for benchmarking.
"""

from __future__ import annotations

import os

from . import _kernels_py

_forced = os.environ.get("SPINQUENCH_KERNELS", "").lower()

try:
    from . import _kernels  # compiled extension, absent on fallback installs
except ImportError:
    _kernels = None

if _forced == "numpy":
    _impl, BACKEND = _kernels_py, "numpy"
elif _forced == "cython":
    if _kernels is None:
        raise ImportError("SPINQUENCH_KERNELS=cython but the compiled extension is not built")
    _impl, BACKEND = _kernels, "cython"
elif _kernels is not None:
    _impl, BACKEND = _kernels, "cython"
else:
    _impl, BACKEND = _kernels_py, "numpy"

pauli_apply = _impl.pauli_apply


def available_backends() -> dict:
    """Name -> module map of importable kernel implementations."""
    found = {"numpy": _kernels_py}
    if _kernels is not None:
        found["cython"] = _kernels
    return found
