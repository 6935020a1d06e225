# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled state-vector kernels.

Same contract as ``_kernels_py``: a fused gather/multiply-add loop for the
sum-of-products Pauli application.  The fusion avoids the three full-size
temporaries (index xor, gather, product) that the numpy path allocates per
bit mask.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def pauli_apply(psi, diag, masks, phases, out):
    """out = (diag + sum_k P_k) @ psi, with P_k a phased bit-flip permutation."""
    if np.iscomplexobj(phases):
        _apply_cphase(psi, diag, masks, phases, out)
    else:
        _apply_rphase(psi, diag, masks, phases, out)
    return out


def _apply_rphase(double complex[::1] psi, double[::1] diag,
                  cnp.uint64_t[::1] masks, double[:, ::1] phases,
                  double complex[::1] out):
    cdef Py_ssize_t dim = psi.shape[0]
    cdef Py_ssize_t nmask = masks.shape[0]
    cdef Py_ssize_t k, m
    cdef cnp.uint64_t mask
    with nogil:
        for m in range(dim):
            out[m] = diag[m] * psi[m]
        for k in range(nmask):
            mask = masks[k]
            for m in range(dim):
                out[m] = out[m] + phases[k, m] * psi[m ^ mask]


def _apply_cphase(double complex[::1] psi, double[::1] diag,
                  cnp.uint64_t[::1] masks, double complex[:, ::1] phases,
                  double complex[::1] out):
    cdef Py_ssize_t dim = psi.shape[0]
    cdef Py_ssize_t nmask = masks.shape[0]
    cdef Py_ssize_t k, m
    cdef cnp.uint64_t mask
    with nogil:
        for m in range(dim):
            out[m] = diag[m] * psi[m]
        for k in range(nmask):
            mask = masks[k]
            for m in range(dim):
                out[m] = out[m] + phases[k, m] * psi[m ^ mask]
