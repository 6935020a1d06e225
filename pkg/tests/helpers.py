"""Shared independent oracles for the test suite.

Everything here is deliberately naive (dense matrices, explicit loops) so it
shares no code path with the package internals it checks.
"""

import numpy as np

SIGMA = {
    "x": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    "z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
}


def site_operator(n_sites: int, site: int, axis: str) -> np.ndarray:
    """sigma^axis on one site as a dense 2^L x 2^L matrix (site 0 = LSB)."""
    ops = [np.eye(2, dtype=complex)] * n_sites
    ops[site] = SIGMA[axis]
    full = ops[n_sites - 1]
    for k in range(n_sites - 2, -1, -1):
        full = np.kron(full, ops[k])
    return full


def dense_matrix(termlist) -> np.ndarray:
    """Sum of explicit Kronecker-product terms for a TermList."""
    n = termlist.n_sites
    h = np.zeros((1 << n, 1 << n), dtype=complex)
    for coeff, factors in termlist.terms:
        ops = [np.eye(2, dtype=complex)] * n
        for site, axis in factors:
            ops[site] = SIGMA[axis]
        full = ops[n - 1]
        for k in range(n - 2, -1, -1):
            full = np.kron(full, ops[k])
        h += coeff * full
    return h


def random_state(n_sites: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=1 << n_sites) + 1j * rng.normal(size=1 << n_sites)
    return psi / np.linalg.norm(psi)


def partial_trace_loops(psi: np.ndarray, n_sites: int, sites) -> np.ndarray:
    """Reduced density matrix by explicit double loop over basis states.

    Row/col index packs the kept bits with sites[0] least significant,
    mirroring the convention documented on ReducedDensity.
    """
    sites = sorted(sites)
    env = [s for s in range(n_sites) if s not in sites]
    dim = 1 << n_sites
    rho = np.zeros((1 << len(sites), 1 << len(sites)), dtype=complex)

    def key(m):
        return sum(((m >> s) & 1) << k for k, s in enumerate(sites))

    def env_key(m):
        return sum(((m >> s) & 1) << k for k, s in enumerate(env))

    for m in range(dim):
        for mp in range(dim):
            if env_key(m) == env_key(mp):
                rho[key(m), key(mp)] += psi[m] * np.conjugate(psi[mp])
    return rho
