"""Two-body Pauli Hamiltonians as explicit sum-of-products term lists.

The Hamiltonian is H = -sum_{i<j} sum_b J^b_ij sigma^b_i sigma^b_j, stored as
a flat list of (coefficient, ((site, axis), (site, axis))) entries with the
sign folded into the coefficient.  Terms with zero coupling are omitted.

``apply_terms`` applies H to a state vector without ever materializing a
2^L x 2^L matrix: z-axis factors are diagonal in the computational basis and
x/y factors are bit flips with +-1 (or +-i) phases, so each term reduces to a
masked gather plus a fused multiply-add.  Site 0 is the least significant bit
and bit value 0 encodes the sigma^z = +1 state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels
from .lattice import CouplingMatrix

PAULI_AXES = ("x", "y", "z")

Factor = tuple[int, str]
Term = tuple[float, tuple[Factor, Factor]]


@dataclass(frozen=True)
class TermList:
    """Validated collection of two-site Pauli product terms."""

    n_sites: int
    terms: tuple[Term, ...] = field(repr=False)

    def __post_init__(self):
        seen = set()
        for coeff, factors in self.terms:
            if len(factors) != 2:
                raise ValueError(f"term must have exactly two factors, got {factors}")
            (i, a), (j, b) = factors
            if i == j:
                raise ValueError(f"term factors must act on distinct sites, got site {i} twice")
            for site, axis in factors:
                if not 0 <= site < self.n_sites:
                    raise ValueError(f"site {site} outside lattice of {self.n_sites} sites")
                if axis not in PAULI_AXES:
                    raise ValueError(f"unknown Pauli axis {axis!r}")
            if coeff == 0.0 or not np.isfinite(coeff):
                raise ValueError(f"coefficient must be finite and nonzero, got {coeff}")
            signature = tuple(sorted(factors))
            if signature in seen:
                raise ValueError(f"duplicate term signature {signature}")
            seen.add(signature)

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    @cached_property
    def _compiled(self) -> "_CompiledTerms":
        return _CompiledTerms(self)


def heisenberg_terms(cm: CouplingMatrix) -> TermList:
    """Term list of H = -sum_{i<j} [J^x_ij XX + J^y_ij YY + J^z_ij ZZ]."""
    n = cm.n_sites
    terms: list[Term] = []
    for axis, mat in cm.axes().items():
        for i in range(n):
            for j in range(i + 1, n):
                if mat[i, j] != 0.0:
                    terms.append((-float(mat[i, j]), ((i, axis), (j, axis))))
    return TermList(n_sites=n, terms=tuple(terms))


def apply_terms(terms: TermList, psi: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """Matrix-free H @ psi for a full 2^L state vector."""
    return terms._compiled.apply(psi, out=out)


# Per-factor phase at the *target* basis state m (bit value b at the factor's
# site): z contributes (1 - 2b) and leaves the bit alone; x flips with phase 1;
# y flips with phase i(2b - 1).
def _factor_phase(axis: str, bits: np.ndarray):
    if axis == "z":
        return 1.0 - 2.0 * bits
    if axis == "x":
        return np.ones_like(bits, dtype=float)
    return 1.0j * (2.0 * bits - 1.0)


class _CompiledTerms:
    """Gather/phase tables for fast repeated application of a TermList.

    All z-z terms fold into a single real diagonal.  Flip terms sharing a bit
    mask (e.g. the XX and YY parts of one bond) coalesce into one phase table,
    so an XYZ model costs one gather per bond, not per term.
    """

    def __init__(self, termlist: TermList):
        n = termlist.n_sites
        dim = 1 << n
        idx = np.arange(dim, dtype=np.uint64)
        bit = [(idx >> np.uint64(k)) & np.uint64(1) for k in range(n)]

        diag = np.zeros(dim)
        tables: dict[int, np.ndarray] = {}
        for coeff, ((i, a), (j, b)) in termlist.terms:
            mask = (1 << i if a != "z" else 0) | (1 << j if b != "z" else 0)
            if mask == 0:
                diag += coeff * (1.0 - 2.0 * bit[i]) * (1.0 - 2.0 * bit[j])
                continue
            phase = coeff * _factor_phase(a, bit[i]) * _factor_phase(b, bit[j])
            if mask in tables:
                tables[mask] = tables[mask] + phase
            else:
                tables[mask] = phase

        self.n_sites = n
        self.dim = dim
        self.diag = diag
        self.masks = np.array(sorted(tables), dtype=np.uint64)
        real_ok = all(np.isrealobj(tables[m]) or np.allclose(tables[m].imag, 0.0) for m in self.masks)
        stack = np.empty((len(self.masks), dim), dtype=float if real_ok else complex)
        for row, m in enumerate(self.masks):
            stack[row] = tables[m].real if real_ok else tables[m]
        self.phases = stack

    def apply(self, psi: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        psi = np.ascontiguousarray(psi, dtype=complex)
        if psi.shape != (self.dim,):
            raise ValueError(f"state has {psi.size} amplitudes, expected {self.dim}")
        if out is None:
            out = np.empty(self.dim, dtype=complex)
        return kernels.pauli_apply(psi, self.diag, self.masks, self.phases, out)
