"""Pure-numpy implementation of the hot state-vector kernels.

Fallback used when the compiled extension is unavailable (or when
SPINQUENCH_KERNELS=numpy forces it).  Must perform the same arithmetic in
the same order as the Cython version in ``_kernels.pyx``; the test suite
checks agreement to machine precision (complex-product rounding may differ
between compilers by a few ULP).
"""

from __future__ import annotations

import numpy as np


def pauli_apply(psi, diag, masks, phases, out):
    """out = (diag + sum_k P_k) @ psi.

    Each row ``phases[k]`` is the per-basis-state phase of a flip operator
    whose permutation is ``m -> m ^ masks[k]``.
    """
    np.multiply(diag, psi, out=out)
    if len(masks):
        idx = np.arange(psi.size, dtype=np.uint64)
        for mask, phase in zip(masks, phases):
            out += phase * psi[idx ^ mask]
    return out
