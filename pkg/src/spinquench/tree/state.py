"""Tree wavefunction container, construction, gauge fixing, and checkpoints.

A ``TreeState`` owns one complex tensor per node: shape (m, child dims) for
non-root nodes, whose m rows (flattened over child axes) stay orthonormal,
and the bare child-dim tensor at the root, which carries the norm.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..ed import StateVector
from .topology import TreeTopology, parse_tree

CHECKPOINT_VERSION = 1


@dataclass
class TreeState:
    """Layered tensor wavefunction at a single time."""

    topology: TreeTopology
    tensors: list[np.ndarray] = field(repr=False)
    time: float = 0.0

    def __post_init__(self):
        if len(self.tensors) != self.topology.n_nodes:
            raise ValueError(
                f"{len(self.tensors)} tensors for {self.topology.n_nodes} nodes"
            )
        for node in self.topology.nodes:
            want = self.topology.tensor_shape(node)
            got = self.tensors[node.index].shape
            if got != want:
                raise ValueError(f"node {node.index} tensor has shape {got}, expected {want}")

    def copy(self) -> "TreeState":
        return TreeState(self.topology, [t.copy() for t in self.tensors], self.time)

    def norm(self) -> float:
        return float(np.linalg.norm(self.tensors[-1]))


def norm(state: TreeState) -> float:
    return state.norm()


def orthonormality_residual(state: TreeState) -> float:
    """Worst deviation of any non-root node's rows from orthonormality."""
    worst = 0.0
    for node in state.topology.nodes[:-1]:
        b = state.tensors[node.index].reshape(node.m, -1)
        gram = b @ b.conj().T
        worst = max(worst, float(np.abs(gram - np.eye(node.m)).max()))
    return worst


def _completed_basis(first: np.ndarray, m: int) -> np.ndarray:
    """(m, dim) orthonormal rows starting from ``first``.

    Completion is a deterministic Gram-Schmidt against the canonical basis in
    index order, so identical inputs always produce identical tensors.
    """
    dim = first.size
    rows = [first / np.linalg.norm(first)]
    for k in range(dim):
        if len(rows) == m:
            break
        candidate = np.zeros(dim, dtype=complex)
        candidate[k] = 1.0
        for row in rows:
            candidate -= np.vdot(row, candidate) * row
        length = np.linalg.norm(candidate)
        if length > 1e-8:
            rows.append(candidate / length)
    if len(rows) < m:
        raise ValueError(f"cannot complete {m} orthonormal vectors in dimension {dim}")
    return np.array(rows)


def build_initial_state(topology: TreeTopology) -> TreeState:
    """x-polarized product state |→→…→⟩ on the given tree.

    The first basis vector of each leaf is the uniform superposition on its
    site group; the first vector of each interior node is "all children in
    their first vector"; the root puts weight 1 on that configuration.
    Remaining vectors are deterministic orthonormal completions.
    """
    tensors: list[np.ndarray] = []
    for node in topology.nodes:
        shape = topology.tensor_shape(node)
        if node.is_root:
            t = np.zeros(shape, dtype=complex)
            t[(0,) * len(shape)] = 1.0
            tensors.append(t)
            continue
        dim = int(np.prod(shape[1:]))
        first = np.zeros(dim, dtype=complex)
        if node.is_leaf:
            first[:] = dim ** -0.5
        else:
            first[0] = 1.0
        tensors.append(_completed_basis(first, node.m).reshape(shape))
    return TreeState(topology, tensors, 0.0)


def canonicalize(state: TreeState, renormalize: bool = False) -> TreeState:
    """Restore exact row orthonormality at every non-root node.

    Works bottom-up: each node's flattened tensor is replaced by the Q factor
    of a QR decomposition and the R factor is absorbed into the parent's
    matching axis — an exact gauge transformation of the same wavefunction.
    With ``renormalize`` the root is also rescaled to unit norm.
    """
    topo = state.topology
    tensors = [t.copy() for t in state.tensors]
    for node in topo.nodes[:-1]:
        flat = tensors[node.index].reshape(node.m, -1)
        q, r = np.linalg.qr(flat.T.conj(), mode="reduced")
        tensors[node.index] = q.T.conj().reshape(tensors[node.index].shape)
        parent = topo.nodes[node.parent]
        axis = parent.children.index(node.index) + (0 if parent.is_root else 1)
        absorbed = np.tensordot(tensors[parent.index], r.conj(), axes=([axis], [1]))
        tensors[parent.index] = np.moveaxis(absorbed, -1, axis)
    if renormalize:
        tensors[-1] = tensors[-1] / np.linalg.norm(tensors[-1])
    return TreeState(topo, tensors, state.time)


def to_statevector(state: TreeState, max_sites: int = 16) -> StateVector:
    """Contract the full tree into a dense 2^L state vector (site 0 = LSB)."""
    topo = state.topology
    if topo.n_sites > max_sites:
        raise ValueError(
            f"L={topo.n_sites} exceeds the dense-reconstruction guard ({max_sites}); "
            "raise max_sites explicitly if you really want 2^L amplitudes"
        )

    # expanded[node] = (array of shape (m, 2, 2, …), site order of those axes)
    expanded: dict[int, tuple[np.ndarray, list[int]]] = {}
    for node in topo.nodes[:-1]:
        if node.is_leaf:
            expanded[node.index] = (state.tensors[node.index], list(node.sites))
            continue
        block = state.tensors[node.index]
        sites: list[int] = []
        for c in node.children:
            child, child_sites = expanded.pop(c)
            # Contract the child axis (always position 1: earlier children
            # have already been replaced by site axes appended at the end),
            # which appends this child's site axes after the existing ones.
            block = np.tensordot(block, child, axes=([1], [0]))
            sites = sites + child_sites
        expanded[node.index] = (block, sites)

    root = state.tensors[-1]
    sites: list[int] = []
    for c in topo.root.children:
        child, child_sites = expanded.pop(c)
        root = np.tensordot(root, child, axes=([0], [0]))
        sites = sites + child_sites
    # Now axes run over `sites`; reorder to site order L-1 … 0 for C-order
    # flattening with site 0 least significant.
    order = [sites.index(s) for s in range(topo.n_sites - 1, -1, -1)]
    amplitudes = np.ascontiguousarray(root.transpose(order)).reshape(-1)
    return StateVector(amplitudes, topo.n_sites, state.time)


def save_checkpoint(state: TreeState, path) -> None:
    """Dump topology, time, and all node tensors to a versioned .npz file."""
    payload = {
        "version": np.array(CHECKPOINT_VERSION),
        "spec_string": np.array(state.topology.spec_string),
        "site_groups": np.array(
            [node.sites for node in state.topology.nodes if node.is_leaf], dtype=np.int64
        ),
        "time": np.array(state.time),
    }
    for node in state.topology.nodes:
        payload[f"tensor_{node.index}"] = state.tensors[node.index]
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_checkpoint(path) -> TreeState:
    with np.load(path, allow_pickle=False) as data:
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        topo = parse_tree(str(data["spec_string"]), site_groups=data["site_groups"])
        tensors = [np.array(data[f"tensor_{k}"]) for k in range(topo.n_nodes)]
        return TreeState(topo, tensors, float(data["time"]))
