"""Static routing of a sum-of-products Hamiltonian onto a tree.

Every two-site term is classified once, before propagation:

* both sites in one leaf group → applied directly on that leaf's site axes;
* otherwise the term is "born" at the lowest node whose distinct children
  separate the two sites, and recorded there in a coupling block.

Blocks collect all terms sharing (child pair, Pauli axes) into a matrix over
(site, site) and factor it by SVD, so n_a x n_b individual couplings become
rank(M) pairs of weighted one-site operator combinations — rank 1 for uniform
all-to-all couplings and small for power-law decay.  The per-node ``active``
sets list the single-site factors whose restriction matrices each node must
track because some partner site lies outside its subtree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..hamiltonian import TermList
from .topology import TreeTopology

SVD_RELATIVE_CUTOFF = 1e-12


@dataclass(frozen=True)
class PairGroup:
    """All terms born at one node that couple the same child pair with the
    same Pauli axes, in SVD-factored form."""

    child_a: int  # child position at the owning node
    child_b: int
    pauli_a: str
    pauli_b: str
    factors_a: tuple[tuple[int, str], ...]  # (site, pauli_a), block row order
    factors_b: tuple[tuple[int, str], ...]
    weights_a: np.ndarray  # (rank, n_a); singular values folded into this side
    weights_b: np.ndarray  # (rank, n_b)

    @property
    def rank(self) -> int:
        return self.weights_a.shape[0]


@dataclass(frozen=True)
class HamiltonianPlan:
    """Per-node term routing for one (topology, term list) pair."""

    topology: TreeTopology
    leaf_terms: tuple[tuple, ...]  # per node: ((coeff, (axis_pos, pauli), (axis_pos, pauli)), ...)
    groups: tuple[tuple[PairGroup, ...], ...]  # per node
    active: tuple[tuple[tuple[int, str], ...], ...]  # per node: ordered (site, pauli)


def _ancestry(topology: TreeTopology) -> list[list[int]]:
    """Node chains from each node up to the root (inclusive)."""
    chains = []
    for node in topology.nodes:
        chain = [node.index]
        while topology.nodes[chain[-1]].parent is not None:
            chain.append(topology.nodes[chain[-1]].parent)
        chains.append(chain)
    return chains


def child_position(topology: TreeTopology, node_index: int, site: int) -> int:
    """Axis position (among children) through which ``site`` hangs."""
    node = topology.nodes[node_index]
    if node.is_leaf:
        return node.sites.index(site)
    for pos, c in enumerate(node.children):
        if site in topology.subtree_sites[c]:
            return pos
    raise ValueError(f"site {site} is not below node {node_index}")


def build_plan(topology: TreeTopology, terms: TermList) -> HamiltonianPlan:
    if terms.n_sites != topology.n_sites:
        raise ValueError(
            f"term list covers {terms.n_sites} sites but the tree has {topology.n_sites}"
        )
    chains = _ancestry(topology)
    leaf_terms: list[list] = [[] for _ in topology.nodes]
    blocks: dict[tuple, dict[tuple[int, int], float]] = {}
    active: list[set] = [set() for _ in topology.nodes]

    for coeff, ((i, ai), (j, aj)) in terms:
        leaf_i = topology.site_leaf[i]
        leaf_j = topology.site_leaf[j]
        if leaf_i == leaf_j:
            node = topology.nodes[leaf_i]
            leaf_terms[leaf_i].append(
                (float(coeff), (node.sites.index(i), ai), (node.sites.index(j), aj))
            )
            continue
        chain_i, chain_j = chains[leaf_i], chains[leaf_j]
        common = set(chain_i) & set(chain_j)
        lca = next(n for n in chain_i if n in common)
        pos_i = child_position(topology, lca, i)
        pos_j = child_position(topology, lca, j)
        if pos_i > pos_j:
            i, j, ai, aj, pos_i, pos_j = j, i, aj, ai, pos_j, pos_i
            chain_i, chain_j = chain_j, chain_i
        key = (lca, pos_i, pos_j, ai, aj)
        entry = blocks.setdefault(key, {})
        entry[(i, j)] = entry.get((i, j), 0.0) + float(coeff)
        for n in chain_i[: chain_i.index(lca)]:
            active[n].add((i, ai))
        for n in chain_j[: chain_j.index(lca)]:
            active[n].add((j, aj))

    groups: list[list[PairGroup]] = [[] for _ in topology.nodes]
    for (node, pos_a, pos_b, pa, pb), entry in sorted(blocks.items()):
        sites_a = sorted({i for i, _ in entry})
        sites_b = sorted({j for _, j in entry})
        block = np.zeros((len(sites_a), len(sites_b)))
        for (i, j), c in entry.items():
            block[sites_a.index(i), sites_b.index(j)] = c
        u, s, vh = np.linalg.svd(block, full_matrices=False)
        keep = s > SVD_RELATIVE_CUTOFF * s[0]
        groups[node].append(
            PairGroup(
                child_a=pos_a,
                child_b=pos_b,
                pauli_a=pa,
                pauli_b=pb,
                factors_a=tuple((i, pa) for i in sites_a),
                factors_b=tuple((j, pb) for j in sites_b),
                weights_a=(u[:, keep] * s[keep]).T.copy(),
                weights_b=vh[keep, :].copy(),
            )
        )

    return HamiltonianPlan(
        topology=topology,
        leaf_terms=tuple(tuple(t) for t in leaf_terms),
        groups=tuple(tuple(g) for g in groups),
        active=tuple(tuple(sorted(a)) for a in active),
    )
