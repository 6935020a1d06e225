"""Tree tensor network backend: multilayer variational spin dynamics.

The wavefunction is a layered tree of orthonormal single-particle-function
bases with a small coefficient tensor at the root.  ``parse_tree`` reads the
compact layer notation, ``build_initial_state`` prepares the x-polarized
product state, and ``TreeEngine.propagate`` integrates the variational
equations of motion between snapshot times.
"""

from .engine import (
    TreeEngine,
    entanglement_entropy,
    measure_x,
    natural_population_tail,
    natural_populations,
    one_point_x,
    two_point_xx,
)
from .plan import HamiltonianPlan, PairGroup, build_plan
from .state import (
    TreeState,
    build_initial_state,
    canonicalize,
    load_checkpoint,
    orthonormality_residual,
    save_checkpoint,
    to_statevector,
)
from .topology import TreeNode, TreeTopology, parse_tree, plaquette_groups

__all__ = [
    "HamiltonianPlan",
    "PairGroup",
    "TreeEngine",
    "TreeNode",
    "TreeState",
    "TreeTopology",
    "build_initial_state",
    "build_plan",
    "canonicalize",
    "entanglement_entropy",
    "load_checkpoint",
    "measure_x",
    "natural_population_tail",
    "natural_populations",
    "one_point_x",
    "orthonormality_residual",
    "parse_tree",
    "plaquette_groups",
    "save_checkpoint",
    "to_statevector",
]
