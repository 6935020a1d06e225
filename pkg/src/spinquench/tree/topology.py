"""Tree layouts for layered tensor wavefunctions.

A topology is written ``"32→[2]16→[4]4→[12]1"`` (ASCII ``->`` also accepted):
the plain numbers are layer sizes from physical sites down to the single root,
and each bracketed number is the basis-vector count retained per node of the
layer to its left.  The first label therefore always reads 2 (a spin-1/2 site
keeps its full two states); the root carries no label because it holds the
wavefunction itself rather than a basis.  ``32→[2]16→[4]4→[12]1`` is 32 sites,
16 leaves of 2 sites keeping m=4 vectors each, 4 interior nodes of 4 leaves
keeping m=12, and a root tensor over the 4 interior nodes.

Leaf groups default to contiguous site blocks; an explicit ``site_groups``
partition supports non-contiguous groupings such as 2x2 plaquettes of a
row-major square lattice.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property
from math import prod


@dataclass(frozen=True)
class TreeNode:
    """One node of the tree (leaves are layer 1; physical sites are layer 0)."""

    index: int
    layer: int
    parent: int | None
    children: tuple[int, ...]  # node indices; empty for leaves
    sites: tuple[int, ...]  # physical sites owned directly (leaves only)
    m: int  # retained basis-vector count (1 at the root)

    @property
    def is_leaf(self) -> bool:
        return self.layer == 1

    @property
    def is_root(self) -> bool:
        return self.parent is None


@dataclass(frozen=True)
class TreeTopology:
    """Symmetric layered tree over ``n_sites`` spins.

    Nodes are stored bottom-up: all leaves first (in site order), then each
    higher layer, root last.  ``subtree_sites`` and tensor shapes are derived.
    """

    spec_string: str
    n_sites: int
    nodes: tuple[TreeNode, ...]

    @property
    def root(self) -> TreeNode:
        return self.nodes[-1]

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @cached_property
    def subtree_sites(self) -> tuple[tuple[int, ...], ...]:
        """Sorted physical sites under each node."""
        out: list[tuple[int, ...]] = [()] * len(self.nodes)
        for node in self.nodes:  # bottom-up order guarantees children first
            if node.is_leaf:
                out[node.index] = node.sites
            else:
                merged: list[int] = []
                for c in node.children:
                    merged.extend(out[c])
                out[node.index] = tuple(sorted(merged))
        return tuple(out)

    @cached_property
    def site_leaf(self) -> tuple[int, ...]:
        """Leaf node index owning each physical site."""
        owner = [-1] * self.n_sites
        for node in self.nodes:
            if node.is_leaf:
                for s in node.sites:
                    owner[s] = node.index
        return tuple(owner)

    def child_dims(self, node: TreeNode) -> tuple[int, ...]:
        """Dimensions of a node's child axes (2 per site at leaves)."""
        if node.is_leaf:
            return (2,) * len(node.sites)
        return tuple(self.nodes[c].m for c in node.children)

    def tensor_shape(self, node: TreeNode) -> tuple[int, ...]:
        """(m, child dims) for non-root nodes; child dims alone at the root."""
        dims = self.child_dims(node)
        return dims if node.is_root else (node.m, *dims)

    def bound(self, node: TreeNode) -> int:
        """Subspace dimension bound: a node cannot keep more orthonormal
        vectors than its child space holds."""
        return prod(self.child_dims(node))

    def is_full_rank(self, node: TreeNode) -> bool:
        return node.m >= self.bound(node)

    def node_for_cut(self, sites) -> TreeNode:
        """Node whose subtree (or its complement) equals the requested block.

        Entanglement cuts must align with the tree: for a pure state the
        entropy of a block equals that of its complement, so either match is
        acceptable.  Raises with the nearest compatible cuts otherwise.
        """
        want = tuple(sorted(int(s) for s in sites))
        if not want or want[0] < 0 or want[-1] >= self.n_sites:
            raise ValueError(f"cut {want} is not a nonempty subset of 0..{self.n_sites - 1}")
        complement = tuple(s for s in range(self.n_sites) if s not in set(want))
        if not complement:
            raise ValueError("cut must be a proper subset of the lattice")
        for node in self.nodes[:-1]:
            held = self.subtree_sites[node.index]
            if held == want or held == complement:
                return node
        ranked = sorted(
            self.nodes[:-1],
            key=lambda nd: len(set(self.subtree_sites[nd.index]) ^ set(want)),
        )
        nearest = ", ".join(str(list(self.subtree_sites[nd.index])) for nd in ranked[:3])
        raise ValueError(
            f"bipartition {list(want)} does not align with any tree node; "
            f"nearest compatible cuts: {nearest}"
        )


_ARROW = re.compile(r"\s*(?:→|->)\s*")
_LABELED = re.compile(r"\[(\d+)\](\d+)")


def parse_tree(text: str, site_groups=None) -> TreeTopology:
    """Parse a tree specification string into a TreeTopology.

    ``site_groups`` (optional) assigns physical sites to leaves explicitly:
    a sequence of equally sized, disjoint site tuples covering 0..L-1, in
    leaf order.  Default is the contiguous partition.
    """
    pieces = _ARROW.split(text.strip())
    if len(pieces) < 3:
        raise ValueError(
            f"tree spec needs at least sites, one node layer, and a root: {text!r}"
        )
    if not re.fullmatch(r"\d+", pieces[0]):
        raise ValueError(f"tree spec must start with the site count: {text!r}")
    layer_sizes = [int(pieces[0])]
    labels = []
    for piece in pieces[1:]:
        m = _LABELED.fullmatch(piece)
        if not m:
            raise ValueError(
                f"malformed tree layer {piece!r} in {text!r}; expected '[m]count'"
            )
        labels.append(int(m.group(1)))
        layer_sizes.append(int(m.group(2)))
    if layer_sizes[-1] != 1:
        raise ValueError(f"tree spec must end in a single root, got {layer_sizes[-1]}")
    if any(s < 1 for s in layer_sizes) or any(v < 1 for v in labels):
        raise ValueError(f"layer sizes and labels must be positive: {text!r}")
    if labels[0] != 2:
        raise ValueError(
            f"the first label is the per-site dimension and must be 2, got {labels[0]}"
        )
    for a, b in zip(layer_sizes, layer_sizes[1:]):
        if a % b != 0:
            raise ValueError(f"layer of {a} nodes does not divide evenly into {b}")

    n_sites = layer_sizes[0]
    n_leaves = layer_sizes[1]
    group_size = n_sites // n_leaves
    if site_groups is None:
        groups = [
            tuple(range(k * group_size, (k + 1) * group_size)) for k in range(n_leaves)
        ]
    else:
        groups = [tuple(sorted(int(s) for s in g)) for g in site_groups]
        if len(groups) != n_leaves:
            raise ValueError(
                f"site_groups has {len(groups)} groups but the tree has {n_leaves} leaves"
            )
        if any(len(g) != group_size for g in groups):
            raise ValueError(f"all site groups must have {group_size} sites")
        flat = sorted(s for g in groups for s in g)
        if flat != list(range(n_sites)):
            raise ValueError("site_groups must partition the sites exactly")
        groups.sort(key=lambda g: g[0])

    nodes: list[TreeNode] = []
    previous_layer: list[int] = []
    for layer in range(1, len(layer_sizes)):
        count = layer_sizes[layer]
        is_root = layer == len(layer_sizes) - 1
        m = 1 if is_root else labels[layer]
        current: list[int] = []
        fan = (n_leaves if layer == 1 else len(previous_layer)) // count
        for k in range(count):
            index = len(nodes)
            if layer == 1:
                node = TreeNode(index, 1, None, (), groups[k], m)
            else:
                children = tuple(previous_layer[k * fan : (k + 1) * fan])
                node = TreeNode(index, layer, None, children, (), m)
            nodes.append(node)
            current.append(index)
        previous_layer = current

    # Wire parents (nodes are frozen; rebuild with parent indices).
    parent_of: dict[int, int] = {}
    for node in nodes:
        for c in node.children:
            parent_of[c] = node.index
    nodes = [
        TreeNode(n.index, n.layer, parent_of.get(n.index), n.children, n.sites, n.m)
        for n in nodes
    ]

    topo = TreeTopology(spec_string=text.strip(), n_sites=n_sites, nodes=tuple(nodes))
    for node in topo.nodes[:-1]:
        bound = topo.bound(node)
        if node.m > bound:
            raise ValueError(
                f"node {node.index} (layer {node.layer}) keeps m={node.m} vectors "
                f"but its child space only has dimension {bound}"
            )
    return topo


def plaquette_groups(nrows: int, ncols: int) -> list[tuple[int, int, int, int]]:
    """2x2 plaquettes of a row-major square lattice, in row-major plaquette order."""
    if nrows % 2 or ncols % 2:
        raise ValueError(f"plaquette grouping needs even grid dimensions, got {nrows}x{ncols}")
    groups = []
    for pr in range(nrows // 2):
        for pc in range(ncols // 2):
            base = 2 * pr * ncols + 2 * pc
            groups.append((base, base + 1, base + ncols, base + ncols + 1))
    return groups
