"""Variational propagation of tree tensor states and their observables.

The equations of motion follow from the time-dependent variational principle
on the tree ansatz: the root coefficient tensor evolves under the exact
Hamiltonian restricted to the current single-particle-function (SPF) bases,
and every other node evolves under a projected equation driven by

* "inside" terms acting entirely within the node's subtree, and
* mean-field matrices (F for full outside contractions, G for half-contracted
  crossing terms) propagated from the root by a downward sweep, preceded by an
  upward sweep that builds per-node operator restrictions (W) and subtree
  Hamiltonian restrictions.

Single-hole density matrices regularize the inverse in the mean-field class;
the inside class cancels rho^{-1} rho exactly and is applied unregularized.
Nodes whose SPF count equals the full dimension of their child space are
"frozen": the tangent-space projector annihilates their equation, so their
tensors are held constant exactly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from ..hamiltonian import TermList
from .plan import HamiltonianPlan, PairGroup, build_plan, child_position
from .state import TreeState, canonicalize, orthonormality_residual
from .topology import TreeTopology

PAULI = {
    "x": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128),
    "y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=np.complex128),
    "z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=np.complex128),
}

DEFAULT_RTOL = 1e-8
DEFAULT_ATOL = 1e-10
DEFAULT_REG_EPS = 1e-8
ORTHONORMALITY_ABORT = 1e-6
SATURATION_SNAPSHOTS = 3


def _apply(tensor: np.ndarray, matrix: np.ndarray, axis: int) -> np.ndarray:
    """Contract ``matrix[r, s]`` with ``tensor`` along ``axis`` (index s)."""
    return np.moveaxis(np.tensordot(tensor, matrix, axes=([axis], [1])), -1, axis)


def _apply_stack(tensor: np.ndarray, matrices: np.ndarray, axis: int) -> np.ndarray:
    """Apply a stack of matrices (n, d, d) along ``axis``: returns (n, *tensor.shape)."""
    moved = np.tensordot(tensor, matrices, axes=([axis], [2]))
    moved = np.moveaxis(moved, -2, 0)
    return np.moveaxis(moved, -1, 1 + axis)


def _gram(bra: np.ndarray, ket: np.ndarray) -> np.ndarray:
    """<bra_r | ket_s> over all non-SPF axes: both tensors shaped (m, ...)."""
    a = bra.reshape(bra.shape[0], -1)
    b = ket.reshape(ket.shape[0], -1)
    return np.conj(a) @ b.T


def _gram_stack(bra: np.ndarray, kets: np.ndarray) -> np.ndarray:
    """Batched _gram over a stack of kets (n, m, ...) -> (n, m, m)."""
    a = np.conj(bra.reshape(bra.shape[0], -1))
    b = kets.reshape(kets.shape[0], kets.shape[1], -1)
    return np.matmul(b, a.T).transpose(0, 2, 1)


def _gram_except(bra: np.ndarray, ket: np.ndarray, axis: int) -> np.ndarray:
    """Contract all axes except ``axis``: out[r, s] = sum conj(bra[..r..]) ket[..s..]."""
    others = [k for k in range(bra.ndim) if k != axis]
    return np.tensordot(np.conj(bra), ket, axes=(others, others))


def _gram_except_stack(bra: np.ndarray, kets: np.ndarray, axis: int) -> np.ndarray:
    """Batched _gram_except over kets (n, *bra.shape) -> (n, m, m)."""
    d = bra.shape[axis]
    a = np.conj(np.moveaxis(bra, axis, -1).reshape(-1, d))
    b = np.moveaxis(kets, 1 + axis, -1).reshape(kets.shape[0], -1, d)
    return np.matmul(a.T, b)


def _regularized_inverse_apply(rho: np.ndarray, tensor: np.ndarray, eps: float) -> np.ndarray:
    """Apply the regularized inverse of a density matrix along axis 0."""
    evals, vecs = np.linalg.eigh(rho)
    evals = np.clip(evals.real, 0.0, None)
    lam = evals + eps * np.exp(-evals / eps)
    flat = tensor.reshape(tensor.shape[0], -1)
    coeff = vecs.conj().T @ flat
    return (vecs @ (coeff / lam[:, None])).reshape(tensor.shape)


class TreeEngine:
    """Propagator for one (topology, Hamiltonian) pair.

    Instances precompute the term routing plan and all structural lookup
    tables; ``propagate`` then integrates between requested times.
    """

    def __init__(
        self,
        topology: TreeTopology,
        terms: TermList,
        *,
        reg_eps: float = DEFAULT_REG_EPS,
    ):
        self.topology = topology
        self.terms = terms
        self.plan: HamiltonianPlan = build_plan(topology, terms)
        self.reg_eps = float(reg_eps)
        self._shapes = [topology.tensor_shape(n) for n in topology.nodes]
        self._sizes = [int(np.prod(s)) for s in self._shapes]
        self._offsets = np.concatenate([[0], np.cumsum(self._sizes)])
        self.n_dof = int(self._offsets[-1])
        self._frozen = [
            not n.is_root and n.m == topology.bound(n) for n in topology.nodes
        ]
        # A node needs its environment (rho/F/G) if it or any descendant moves.
        needs = [not f for f in self._frozen]
        for node in topology.nodes:  # bottom-up: children first
            if node.is_root:
                continue
            if needs[node.index]:
                needs[node.parent] = True
        self._needs_env = needs
        # Child-axis bookkeeping: factor (site, pauli) -> owning child position.
        self._factor_pos = []
        for node in topology.nodes:
            table = {
                fac: child_position(topology, node.index, fac[0])
                for fac in self.plan.active[node.index]
            }
            self._factor_pos.append(table)
        self.rhs_evaluations = 0

    # -- packing ---------------------------------------------------------

    def pack(self, tensors: list[np.ndarray]) -> np.ndarray:
        return np.concatenate([t.ravel() for t in tensors])

    def unpack(self, y: np.ndarray) -> list[np.ndarray]:
        return [
            y[self._offsets[k] : self._offsets[k + 1]].reshape(self._shapes[k])
            for k in range(len(self._shapes))
        ]

    # -- upward sweep ------------------------------------------------------

    def _group_combos(self, node, group: PairGroup, w_stack, w_row):
        """SVD-combined child restriction matrices for one pair group."""
        ca_node = node.children[group.child_a]
        cb_node = node.children[group.child_b]
        rows_a = np.stack([w_stack[ca_node][w_row[ca_node][fac]] for fac in group.factors_a])
        rows_b = np.stack([w_stack[cb_node][w_row[cb_node][fac]] for fac in group.factors_b])
        combos_a = np.einsum("qn,nab->qab", group.weights_a, rows_a)
        combos_b = np.einsum("qn,nab->qab", group.weights_b, rows_b)
        return combos_a, combos_b

    def _up_sweep(self, tensors):
        """Bottom-up pass building W restrictions, subtree Hamiltonian
        restrictions, and per-group SVD combos."""
        topo = self.topology
        n_nodes = len(topo.nodes)
        w_stack = [None] * n_nodes  # (n_active, m, m) per node
        w_row = [None] * n_nodes  # factor -> row
        hint = [None] * n_nodes  # (m, m) subtree Hamiltonian restriction
        combos = [None] * n_nodes  # per group: (combos_a, combos_b)

        for node in topo.nodes[:-1]:
            B = tensors[node.index]
            m = B.shape[0]
            active = self.plan.active[node.index]
            w_row[node.index] = {fac: k for k, fac in enumerate(active)}

            if node.is_leaf:
                if active:
                    applied = np.stack(
                        [
                            _apply(B, PAULI[p], 1 + node.sites.index(i))
                            for (i, p) in active
                        ]
                    )
                    w_stack[node.index] = _gram_stack(B, applied)
                else:
                    w_stack[node.index] = np.zeros((0, m, m), dtype=np.complex128)
                acc = np.zeros_like(B)
                for coeff, (p1, a1), (p2, a2) in self.plan.leaf_terms[node.index]:
                    acc += coeff * _apply(_apply(B, PAULI[a2], 1 + p2), PAULI[a1], 1 + p1)
                hint[node.index] = _gram(B, acc)
                continue

            # interior node: lift child W rows, grouped per child axis
            if active:
                stack = np.empty((len(active), m, m), dtype=np.complex128)
                by_child: dict[int, list[int]] = {}
                for k, fac in enumerate(active):
                    by_child.setdefault(self._factor_pos[node.index][fac], []).append(k)
                for pos, rows in by_child.items():
                    child = node.children[pos]
                    child_rows = np.stack(
                        [w_stack[child][w_row[child][active[k]]] for k in rows]
                    )
                    applied = _apply_stack(B, child_rows, 1 + pos)
                    stack[rows] = _gram_stack(B, applied)
                w_stack[node.index] = stack
            else:
                w_stack[node.index] = np.zeros((0, m, m), dtype=np.complex128)

            acc = np.zeros_like(B)
            for pos, child in enumerate(node.children):
                acc += _apply(B, hint[child], 1 + pos)
            node_combos = []
            for group in self.plan.groups[node.index]:
                ca, cb = self._group_combos(node, group, w_stack, w_row)
                node_combos.append((ca, cb))
                for q in range(group.rank):
                    acc += _apply(
                        _apply(B, ca[q], 1 + group.child_a), cb[q], 1 + group.child_b
                    )
            combos[node.index] = node_combos
            hint[node.index] = _gram(B, acc)

        # root-level combos
        root = topo.nodes[-1]
        node_combos = []
        for group in self.plan.groups[root.index]:
            ca, cb = self._group_combos(root, group, w_stack, w_row)
            node_combos.append((ca, cb))
        combos[root.index] = node_combos
        return w_stack, w_row, hint, combos

    # -- Hamiltonian application at the root -------------------------------

    def _root_apply(self, A, hint, combos):
        root = self.topology.nodes[-1]
        HA = np.zeros_like(A)
        for pos, child in enumerate(root.children):
            HA += _apply(A, hint[child], pos)
        for group, (ca, cb) in zip(self.plan.groups[root.index], combos[root.index]):
            for q in range(group.rank):
                HA += _apply(_apply(A, ca[q], group.child_a), cb[q], group.child_b)
        return HA

    # -- downward sweep ----------------------------------------------------

    def _down_sweep(self, tensors, w_stack, w_row, hint, combos, HA):
        """Top-down pass producing hole densities rho, outside mean fields F,
        and half-contracted crossing mean fields G (stacked per node, aligned
        with the plan's active factor order)."""
        topo = self.topology
        n_nodes = len(topo.nodes)
        rho = [None] * n_nodes
        F = [None] * n_nodes
        G = [None] * n_nodes

        root = topo.nodes[-1]
        A = tensors[root.index]
        root_groups = self.plan.groups[root.index]
        root_combos = combos[root.index]
        for pos, child in enumerate(root.children):
            if not self._needs_env[child]:
                continue
            rho[child] = _gram_except(A, A, pos)
            touching = _apply(A, hint[child], pos)
            for group, (ca, cb) in zip(root_groups, root_combos):
                if group.child_a == pos or group.child_b == pos:
                    for q in range(group.rank):
                        touching += _apply(
                            _apply(A, ca[q], group.child_a), cb[q], group.child_b
                        )
            F[child] = _gram_except(A, HA - touching, pos)
            # crossing mean fields for active factors of this child
            active = self.plan.active[child]
            g_stack = np.zeros((len(active), tensors[child].shape[0], tensors[child].shape[0]), dtype=np.complex128)
            for group, (ca, cb) in zip(root_groups, root_combos):
                if group.child_a == pos:
                    for q in range(group.rank):
                        env = _gram_except(A, _apply(A, cb[q], group.child_b), pos)
                        for n_fac, fac in enumerate(group.factors_a):
                            g_stack[w_row[child][fac]] += group.weights_a[q, n_fac] * env
                elif group.child_b == pos:
                    for q in range(group.rank):
                        env = _gram_except(A, _apply(A, ca[q], group.child_a), pos)
                        for n_fac, fac in enumerate(group.factors_b):
                            g_stack[w_row[child][fac]] += group.weights_b[q, n_fac] * env
            G[child] = g_stack

        # interior nodes, top-down
        for parent in reversed(topo.nodes[:-1]):
            if parent.is_leaf or not any(
                self._needs_env[c] for c in parent.children
            ):
                continue
            Bp = tensors[parent.index]
            rho_applied = _apply(Bp, rho[parent.index], 0)
            parent_groups = self.plan.groups[parent.index]
            parent_combos = combos[parent.index]
            parent_active = set(self.plan.active[parent.index])
            for pos, child in enumerate(parent.children):
                if not self._needs_env[child]:
                    continue
                axis = 1 + pos
                rho[child] = _gram_except(Bp, rho_applied, axis)

                X = _apply(Bp, F[parent.index], 0)
                for s_pos, sib in enumerate(parent.children):
                    if s_pos != pos:
                        X += _apply(rho_applied, hint[sib], 1 + s_pos)
                for group, (ca, cb) in zip(parent_groups, parent_combos):
                    if group.child_a != pos and group.child_b != pos:
                        for q in range(group.rank):
                            X += _apply(
                                _apply(rho_applied, ca[q], 1 + group.child_a),
                                cb[q],
                                1 + group.child_b,
                            )
                for fac in self.plan.active[parent.index]:
                    f_pos = self._factor_pos[parent.index][fac]
                    if f_pos == pos:
                        continue
                    sib = parent.children[f_pos]
                    g_applied = _apply(Bp, G[parent.index][w_row[parent.index][fac]], 0)
                    X += _apply(
                        g_applied, w_stack[sib][w_row[sib][fac]], 1 + f_pos
                    )
                F[child] = _gram_except(Bp, X, axis)

                active = self.plan.active[child]
                g_stack = np.zeros(
                    (len(active), tensors[child].shape[0], tensors[child].shape[0]),
                    dtype=np.complex128,
                )
                lifted_rows = [
                    k for k, fac in enumerate(active) if fac in parent_active
                ]
                if lifted_rows:
                    parent_rows = np.stack(
                        [
                            G[parent.index][w_row[parent.index][active[k]]]
                            for k in lifted_rows
                        ]
                    )
                    applied = _apply_stack(Bp, parent_rows, 0)
                    g_stack[lifted_rows] = _gram_except_stack(Bp, applied, axis)
                for group, (ca, cb) in zip(parent_groups, parent_combos):
                    if group.child_a == pos:
                        for q in range(group.rank):
                            env = _gram_except(
                                Bp,
                                _apply(rho_applied, cb[q], 1 + group.child_b),
                                axis,
                            )
                            for n_fac, fac in enumerate(group.factors_a):
                                g_stack[w_row[child][fac]] += (
                                    group.weights_a[q, n_fac] * env
                                )
                    elif group.child_b == pos:
                        for q in range(group.rank):
                            env = _gram_except(
                                Bp,
                                _apply(rho_applied, ca[q], 1 + group.child_a),
                                axis,
                            )
                            for n_fac, fac in enumerate(group.factors_b):
                                g_stack[w_row[child][fac]] += (
                                    group.weights_b[q, n_fac] * env
                                )
                G[child] = g_stack
        return rho, F, G

    # -- equations of motion ------------------------------------------------

    def _inside_apply(self, node, B, hint, combos):
        """Sum of Hamiltonian pieces internal to ``node``'s subtree applied to B."""
        acc = np.zeros_like(B)
        base = 0 if node.is_root else 1
        if node.is_leaf:
            for coeff, (p1, a1), (p2, a2) in self.plan.leaf_terms[node.index]:
                acc += coeff * _apply(_apply(B, PAULI[a2], 1 + p2), PAULI[a1], 1 + p1)
            return acc
        for pos, child in enumerate(node.children):
            acc += _apply(B, hint[child], base + pos)
        for group, (ca, cb) in zip(self.plan.groups[node.index], combos[node.index]):
            for q in range(group.rank):
                acc += _apply(
                    _apply(B, ca[q], base + group.child_a), cb[q], base + group.child_b
                )
        return acc

    def rhs(self, tensors):
        """Time derivatives of all node tensors (Schroedinger picture)."""
        self.rhs_evaluations += 1
        topo = self.topology
        w_stack, w_row, hint, combos = self._up_sweep(tensors)
        root = topo.nodes[-1]
        A = tensors[root.index]
        HA = self._root_apply(A, hint, combos)
        rho, F, G = self._down_sweep(tensors, w_stack, w_row, hint, combos, HA)

        derivs = []
        for node in topo.nodes:
            if node.is_root:
                derivs.append(-1j * HA)
                continue
            if self._frozen[node.index]:
                derivs.append(np.zeros_like(tensors[node.index]))
                continue
            B = tensors[node.index]
            inside = self._inside_apply(node, B, hint, combos)
            mean_field = _apply(B, F[node.index], 0)
            active = self.plan.active[node.index]
            if active:
                by_child: dict[int, list[int]] = {}
                for k, fac in enumerate(active):
                    by_child.setdefault(self._factor_pos[node.index][fac], []).append(k)
                for pos, rows in by_child.items():
                    if node.is_leaf:
                        applied = np.stack(
                            [
                                _apply(B, PAULI[active[k][1]], 1 + pos)
                                for k in rows
                            ]
                        )
                    else:
                        child = node.children[pos]
                        child_rows = np.stack(
                            [w_stack[child][w_row[child][active[k]]] for k in rows]
                        )
                        applied = _apply_stack(B, child_rows, 1 + pos)
                    g_rows = G[node.index][rows]
                    m = B.shape[0]
                    mean_field += np.einsum(
                        "nrq,nqX->rX", g_rows, applied.reshape(len(rows), m, -1)
                    ).reshape(B.shape)
            rhs = inside + _regularized_inverse_apply(
                rho[node.index], mean_field, self.reg_eps
            )
            flat = rhs.reshape(B.shape[0], -1)
            b_flat = B.reshape(B.shape[0], -1)
            projected = flat - (flat @ b_flat.conj().T) @ b_flat
            derivs.append(-1j * projected.reshape(B.shape))
        return derivs, HA

    def _packed_rhs(self, t, y):
        # Trial steps of the adaptive integrator can overshoot badly through
        # the regularized inverse; answering garbage states with a huge but
        # finite derivative makes the error estimator reject and shrink the
        # step instead of poisoning the eigensolver with non-finite input.
        if not np.all(np.isfinite(y)) or np.abs(y).max() > 1e6:
            return np.full_like(y, 1e8)
        tensors = self.unpack(y.view(np.complex128))
        derivs, _ = self.rhs(tensors)
        out = self.pack(derivs).view(np.float64)
        if not np.all(np.isfinite(out)):
            return np.full_like(y, 1e8)
        return out

    def energy(self, state: TreeState) -> float:
        """<H> via one upward sweep (real for Hermitian term lists)."""
        tensors = state.tensors
        _, _, hint, combos = self._up_sweep(tensors)
        A = tensors[-1]
        HA = self._root_apply(A, hint, combos)
        return float(np.vdot(A, HA).real)

    # -- propagation ---------------------------------------------------------

    def propagate(
        self,
        state: TreeState,
        t_grid: np.ndarray,
        *,
        rtol: float = DEFAULT_RTOL,
        atol: float = DEFAULT_ATOL,
        snapshot_hook=None,
    ) -> list[TreeState]:
        """Integrate from ``state.time`` through ``t_grid``, returning one
        canonicalized, renormalized snapshot per grid time.

        Raises RuntimeError if the integrator fails or the orthonormality
        residual exceeds the abort threshold before a snapshot.  Warns once if
        the smallest natural population of any truncated node stays below the
        regularization scale for SATURATION_SNAPSHOTS consecutive snapshots.
        """
        t_grid = np.asarray(t_grid, dtype=float)
        if t_grid.ndim != 1 or t_grid.size == 0:
            raise ValueError("time grid must be a non-empty 1D array")
        if np.any(np.diff(t_grid) <= 0):
            raise ValueError("time grid must be strictly increasing")
        if t_grid[0] < state.time - 1e-12:
            raise ValueError(
                f"grid starts at t={t_grid[0]} before the state time {state.time}"
            )

        snapshots: list[TreeState] = []
        current = canonicalize(state, renormalize=True)
        saturation_run = 0
        warned = False
        truncated = [
            n.index
            for n in self.topology.nodes
            if not n.is_root and not self._frozen[n.index]
        ]

        t_now = current.time
        y = self.pack(current.tensors).view(np.float64)
        for t_target in t_grid:
            if t_target > t_now + 1e-14:
                sol = solve_ivp(
                    self._packed_rhs,
                    (t_now, t_target),
                    y,
                    method="RK45",
                    rtol=rtol,
                    atol=atol,
                    t_eval=[t_target],
                    dense_output=False,
                )
                if not sol.success:
                    raise RuntimeError(
                        f"integrator failed between t={t_now} and t={t_target}: "
                        f"{sol.message}"
                    )
                y = sol.y[:, -1].copy()
                t_now = t_target
            tensors = self.unpack(y.view(np.complex128).copy())
            raw = TreeState(topology=self.topology, tensors=tensors, time=t_now)
            residual = orthonormality_residual(raw)
            if residual > ORTHONORMALITY_ABORT:
                per_node = [
                    f"node {n.index} (layer {n.layer}): "
                    f"{np.abs(_gram(tensors[n.index], tensors[n.index]) - np.eye(n.m)).max():.3e}"
                    for n in self.topology.nodes[:-1]
                ]
                raise RuntimeError(
                    "orthonormality lost during propagation "
                    f"(residual {residual:.3e} at t={t_now}); per-node: "
                    + "; ".join(per_node)
                )
            snap = canonicalize(raw, renormalize=True)
            snapshots.append(snap)
            if snapshot_hook is not None:
                snapshot_hook(snap)
            y = self.pack(snap.tensors).view(np.float64)

            if truncated and not warned:
                pops = natural_populations(snap)
                tail = min(pops[k].min() for k in truncated)
                if tail < self.reg_eps:
                    saturation_run += 1
                    if saturation_run >= SATURATION_SNAPSHOTS:
                        warnings.warn(
                            "smallest natural population of a truncated node "
                            f"stayed below the regularization scale {self.reg_eps:g} "
                            f"for {saturation_run} consecutive snapshots; "
                            "results may be regularization-limited",
                            RuntimeWarning,
                            stacklevel=2,
                        )
                        warned = True
                else:
                    saturation_run = 0
        return snapshots


# -- gauge-level observables (no Hamiltonian required) -----------------------


def _hole_densities(state: TreeState) -> list[np.ndarray]:
    """Single-hole density matrices for every non-root node.

    Assumes the canonical gauge (orthonormal SPF bases), in which the hole
    density of a node follows from its parent's by one contraction.
    """
    topo = state.topology
    tensors = state.tensors
    n_nodes = len(topo.nodes)
    rho = [None] * n_nodes
    root = topo.nodes[-1]
    A = tensors[root.index]
    norm2 = np.vdot(A, A).real
    for pos, child in enumerate(root.children):
        rho[child] = _gram_except(A, A, pos) / norm2
    for parent in reversed(topo.nodes[:-1]):
        if parent.is_leaf:
            continue
        Bp = tensors[parent.index]
        rho_applied = _apply(Bp, rho[parent.index], 0)
        for pos, child in enumerate(parent.children):
            rho[child] = _gram_except(Bp, rho_applied, 1 + pos)
    return rho


def natural_populations(state: TreeState) -> dict[int, np.ndarray]:
    """Eigenvalues of each non-root node's hole density, descending.

    Each spectrum sums to one; the tail entries measure how close the node is
    to saturating its retained basis.
    """
    rho = _hole_densities(state)
    out = {}
    for node in state.topology.nodes[:-1]:
        evals = np.linalg.eigvalsh(rho[node.index])
        out[node.index] = np.sort(evals.real)[::-1]
    return out


def natural_population_tail(state: TreeState) -> float:
    """Worst-converged truncated node: the largest smallest-population.

    Only truncated nodes (retained dimension below the full child-space
    dimension) are diagnostic: full-rank nodes always carry exactly as many
    populations as the space allows, including structural zeros.  Falls back
    to all non-root nodes for fully frozen trees.
    """
    topo = state.topology
    pops = natural_populations(state)
    truncated = [
        n.index
        for n in topo.nodes[:-1]
        if n.m < topo.bound(n)
    ]
    candidates = truncated if truncated else [n.index for n in topo.nodes[:-1]]
    return max(pops[k][-1] for k in candidates)


def entanglement_entropy(state: TreeState, sites) -> float:
    """Von Neumann entropy of the reduced state on ``sites``.

    The site set must coincide with a subtree of the topology (or its
    complement); otherwise the tree gauge offers no single-node density and a
    ValueError lists the nearest available cuts.
    """
    node = state.topology.node_for_cut(sites)
    rho = _hole_densities(state)[node.index]
    evals = np.clip(np.linalg.eigvalsh(rho).real, 0.0, None)
    evals = evals[evals > 1e-15]
    return float(-(evals * np.log(evals)).sum())


# -- x-basis correlation sweep ------------------------------------------------


def measure_x(state: TreeState, *, pairs: bool = True, chunk: int = 16):
    """One- and two-point x expectations by a single bottom-up sweep.

    Returns (one_point, two_point) where one_point has shape (L,) and
    two_point (L, L) with unit diagonal, or (one_point, None) when pairs is
    False.  Works in any gauge: contractions are exact and the root norm is
    divided out.
    """
    topo = state.topology
    tensors = state.tensors
    L = topo.n_sites
    n_nodes = len(topo.nodes)
    sx = PAULI["x"]

    # per node: stacked <phi_r| sigma^x_i |phi_s> in subtree-site order
    singles = [None] * n_nodes
    # per node: dict (i, j) -> (m, m) for pairs inside the subtree
    pair_mats: list[dict] = [dict() for _ in range(n_nodes)]

    for node in topo.nodes[:-1]:
        B = tensors[node.index]
        m = B.shape[0]
        sites = topo.subtree_sites[node.index]
        if node.is_leaf:
            applied = np.stack(
                [_apply(B, sx, 1 + node.sites.index(i)) for i in sites]
            )
            singles[node.index] = _gram_stack(B, applied)
            if pairs:
                for a, i in enumerate(sites):
                    for j in sites[a + 1 :]:
                        w2 = _apply(
                            _apply(B, sx, 1 + node.sites.index(j)),
                            sx,
                            1 + node.sites.index(i),
                        )
                        pair_mats[node.index][(i, j)] = _gram(B, w2)
            continue

        stack = np.empty((len(sites), m, m), dtype=np.complex128)
        row = {i: k for k, i in enumerate(sites)}
        for pos, child in enumerate(node.children):
            child_sites = topo.subtree_sites[child]
            rows = [row[i] for i in child_sites]
            for lo in range(0, len(rows), chunk):
                sel = rows[lo : lo + chunk]
                child_rows = singles[child][lo : lo + chunk]
                applied = _apply_stack(B, child_rows, 1 + pos)
                stack[sel] = _gram_stack(B, applied)
        singles[node.index] = stack
        if not pairs:
            continue
        target = pair_mats[node.index]
        # lift pairs already formed inside one child
        for pos, child in enumerate(node.children):
            items = list(pair_mats[child].items())
            for lo in range(0, len(items), chunk):
                sel = items[lo : lo + chunk]
                mats = np.stack([mat for _, mat in sel])
                applied = _apply_stack(B, mats, 1 + pos)
                grams = _gram_stack(B, applied)
                for (key, _), gm in zip(sel, grams):
                    target[key] = gm
            pair_mats[child].clear()
        # pairs born here: one site under each of two children
        for pa in range(len(node.children)):
            for pb in range(pa + 1, len(node.children)):
                ca, cb = node.children[pa], node.children[pb]
                sites_a = topo.subtree_sites[ca]
                sites_b = topo.subtree_sites[cb]
                for ka, i in enumerate(sites_a):
                    one_a = _apply(B, singles[ca][ka], 1 + pa)
                    applied_b = _apply_stack(one_a, singles[cb], 1 + pb)
                    grams = _gram_stack(B, applied_b)
                    for kb, j in enumerate(sites_b):
                        target[(i, j) if i < j else (j, i)] = grams[kb]

    # root evaluation
    root = topo.nodes[-1]
    A = tensors[root.index]
    norm2 = np.vdot(A, A).real
    one_point = np.zeros(L)
    two_point = np.eye(L) if pairs else None

    for pos, child in enumerate(root.children):
        child_sites = topo.subtree_sites[child]
        # singles
        applied = _apply_stack(A, singles[child], pos)
        vals = np.tensordot(
            np.conj(A), applied, axes=(range(A.ndim), range(1, A.ndim + 1))
        )
        for k, i in enumerate(child_sites):
            one_point[i] = vals[k].real / norm2
        if not pairs:
            continue
        # pairs inside this child
        items = list(pair_mats[child].items())
        for lo in range(0, len(items), chunk):
            sel = items[lo : lo + chunk]
            mats = np.stack([mat for _, mat in sel])
            applied2 = _apply_stack(A, mats, pos)
            vals2 = np.tensordot(
                np.conj(A), applied2, axes=(range(A.ndim), range(1, A.ndim + 1))
            )
            for (key, _), v in zip(sel, vals2):
                i, j = key
                two_point[i, j] = two_point[j, i] = v.real / norm2
    if pairs:
        # pairs across two root children: the restriction matrices are
        # Hermitian, so <A| W_i W_j |A> is the overlap of the two
        # singly-applied root tensors; chunking bounds peak memory.
        for pa in range(len(root.children)):
            for pb in range(pa + 1, len(root.children)):
                ca, cb = root.children[pa], root.children[pb]
                sites_a = topo.subtree_sites[ca]
                sites_b = topo.subtree_sites[cb]
                for la in range(0, len(sites_a), chunk):
                    fa = np.conj(
                        _apply_stack(A, singles[ca][la : la + chunk], pa)
                    ).reshape(-1, A.size)
                    for lb in range(0, len(sites_b), chunk):
                        fb = _apply_stack(
                            A, singles[cb][lb : lb + chunk], pb
                        ).reshape(-1, A.size)
                        vals = fa @ fb.T
                        for ka in range(vals.shape[0]):
                            i = sites_a[la + ka]
                            for kb in range(vals.shape[1]):
                                j = sites_b[lb + kb]
                                v = vals[ka, kb].real / norm2
                                two_point[i, j] = two_point[j, i] = v
    return one_point, two_point


def one_point_x(state: TreeState) -> np.ndarray:
    one, _ = measure_x(state, pairs=False)
    return one


def two_point_xx(state: TreeState) -> np.ndarray:
    _, two = measure_x(state, pairs=True)
    return two
