"""Benchmark the state-vector Pauli-apply kernel: compiled vs numpy fallback.

The kernel computes out = (diag + sum_k P_k) psi, where each P_k permutes
amplitudes by XOR with a bit mask and multiplies by a per-state phase table.
It dominates exact Krylov propagation, so both implementations are timed on
the same compiled term data; the run also cross-checks that they agree to
rounding.

Usage: python3 benchmarks/bench_kernels.py [--sizes 12 14 16] [--repeats 7]
"""

import argparse
import time

import numpy as np

from spinquench import kernels
from spinquench.hamiltonian import heisenberg_terms
from spinquench.lattice import build_couplings, build_lattice


def _cases(sizes):
    for n in sizes:
        lattice = build_lattice("chain1D", n)
        yield f"ising  a=3 L={n}", heisenberg_terms(
            build_couplings(lattice, "powerlaw", 3.0, (0.0, 0.0, 1.0))
        )
        yield f"xyz    a=3 L={n}", heisenberg_terms(
            build_couplings(lattice, "powerlaw", 3.0, (0.5, 1.0, 0.25))
        )


def _time_apply(impl, compiled, psi, repeats):
    out = np.empty_like(psi)
    impl.pauli_apply(psi, compiled.diag, compiled.masks, compiled.phases, out)  # warm up
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        impl.pauli_apply(psi, compiled.diag, compiled.masks, compiled.phases, out)
        best = min(best, time.perf_counter() - start)
    return best, out.copy()


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[10, 12, 14, 16])
    parser.add_argument("--repeats", type=int, default=7)
    args = parser.parse_args()

    backends = kernels.available_backends()
    print(f"selected backend: {kernels.BACKEND}; available: {', '.join(backends)}")
    header = f"{'case':<18}{'masks':>6}" + "".join(f"{name:>12}" for name in backends)
    if len(backends) > 1:
        header += f"{'speedup':>10}{'max|diff|':>12}"
    print(header)

    for label, terms in _cases(args.sizes):
        compiled = terms._compiled
        rng = np.random.default_rng(42)
        psi = rng.standard_normal(compiled.dim) + 1j * rng.standard_normal(compiled.dim)
        psi /= np.linalg.norm(psi)
        times, results = {}, {}
        for name, impl in backends.items():
            times[name], results[name] = _time_apply(impl, compiled, psi, args.repeats)
        row = f"{label:<18}{len(compiled.masks):>6}"
        row += "".join(f"{times[name] * 1e3:>10.3f}ms" for name in backends)
        if len(backends) > 1:
            first, second = list(backends)
            gap = float(np.abs(results[first] - results[second]).max())
            row += f"{times['numpy'] / times['cython']:>9.2f}x{gap:>12.2e}"
        print(row)


if __name__ == "__main__":
    main()
