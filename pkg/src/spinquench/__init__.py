"""Quench dynamics of long-range spin-1/2 models.

Four interchangeable engines over one Hamiltonian definition:

- :mod:`spinquench.tree` — variational tree-tensor wavefunctions with
  time-dependent node bases (the workhorse at large L),
- :mod:`spinquench.dtwa` — discrete truncated Wigner trajectory sampling,
- :mod:`spinquench.ed` — Krylov state-vector propagation (small L reference),
- :mod:`spinquench.ising` — closed forms for the pure Ising limit.

``spinquench.harness`` drives complete runs from config files and exposes
the ``spinquench`` command-line entry point.
"""

__version__ = "0.1.0"
