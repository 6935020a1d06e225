"""Lattice geometries and two-body coupling matrices.

Sites live on a 1D open chain or an open square grid with unit spacing.
Couplings are stored as three dense symmetric L x L matrices (one per spin
axis) with zero diagonal.  Three generation modes are supported:

- ``powerlaw``:            J^b_ij = J_b / r_ij^alpha   (alpha = 0: all-to-all)
- ``nearest_neighbor``:    J^b_ij = J_b on lattice graph edges, 0 elsewhere
- ``disordered_powerlaw``: J^z_ij = u_ij / r_ij^alpha with u_ij ~ U[-1, 1]
                           drawn once per unordered pair; x/y axes are zero
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

GEOMETRIES = ("chain1D", "square2D")
MODES = ("powerlaw", "nearest_neighbor", "disordered_powerlaw")

_AXES = ("x", "y", "z")


@dataclass(frozen=True)
class LatticeSpec:
    """Site layout: geometry tag, grid shape and site coordinates.

    Site order is row-major for ``square2D`` (site = row * ncols + col);
    coordinates are in units of the lattice spacing.
    """

    geometry: str
    shape: tuple[int, ...]
    positions: np.ndarray = field(repr=False)

    @property
    def n_sites(self) -> int:
        return self.positions.shape[0]

    def distances(self) -> np.ndarray:
        """Pairwise Euclidean distance matrix, shape (L, L)."""
        delta = self.positions[:, None, :] - self.positions[None, :, :]
        return np.sqrt((delta**2).sum(axis=-1))

    def neighbor_pairs(self) -> tuple[tuple[int, int], ...]:
        """Graph edges (i < j) of the lattice: pairs at unit distance."""
        d = self.distances()
        ii, jj = np.nonzero(np.isclose(d, 1.0))
        return tuple((int(i), int(j)) for i, j in zip(ii, jj) if i < j)


def build_lattice(geometry: str, size) -> LatticeSpec:
    """Construct a LatticeSpec.

    ``size`` is the site count for ``chain1D`` and an (nrows, ncols) pair
    for ``square2D``.
    """
    if geometry == "chain1D":
        length = int(size)
        if length <= 0:
            raise ValueError(f"non-positive lattice size: {size}")
        pos = np.arange(length, dtype=float)[:, None]
        return LatticeSpec(geometry, (length,), pos)
    if geometry == "square2D":
        try:
            nrows, ncols = (int(s) for s in size)
        except TypeError:
            raise ValueError("square2D size must be an (nrows, ncols) pair") from None
        if nrows <= 0 or ncols <= 0:
            raise ValueError(f"non-positive lattice size: {size}")
        rows, cols = np.divmod(np.arange(nrows * ncols), ncols)
        pos = np.stack([rows, cols], axis=1).astype(float)
        return LatticeSpec(geometry, (nrows, ncols), pos)
    raise ValueError(f"unknown geometry: {geometry!r} (expected one of {GEOMETRIES})")


@dataclass(frozen=True)
class CouplingMatrix:
    """Per-axis coupling matrices J^x, J^y, J^z plus their provenance."""

    jx: np.ndarray = field(repr=False)
    jy: np.ndarray = field(repr=False)
    jz: np.ndarray = field(repr=False)
    mode: str = "powerlaw"
    alpha: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        n = self.jz.shape[0]
        for name, mat in self.axes().items():
            if mat.shape != (n, n):
                raise ValueError(f"J^{name} has shape {mat.shape}, expected ({n}, {n})")
            if not np.allclose(mat, mat.T):
                raise ValueError(f"J^{name} is not symmetric")
            if np.any(np.diagonal(mat) != 0.0):
                raise ValueError(f"J^{name} has nonzero diagonal entries")

    @property
    def n_sites(self) -> int:
        return self.jz.shape[0]

    def axes(self) -> dict[str, np.ndarray]:
        return {"x": self.jx, "y": self.jy, "z": self.jz}


def _powerlaw_weights(lattice: LatticeSpec, alpha: float) -> np.ndarray:
    """1 / r^alpha for i != j, 0 on the diagonal."""
    d = lattice.distances()
    np.fill_diagonal(d, 1.0)  # placeholder, diagonal zeroed below
    w = d ** (-float(alpha))
    np.fill_diagonal(w, 0.0)
    return w


def build_couplings(
    lattice: LatticeSpec,
    mode: str,
    alpha: float = 0.0,
    couplings: tuple[float, float, float] = (0.0, 0.0, 1.0),
    seed: int | None = None,
) -> CouplingMatrix:
    """Generate the coupling matrices for a lattice.

    ``couplings`` holds the bare axis strengths (J_x, J_y, J_z).  For
    ``disordered_powerlaw`` a seed is required and ``couplings`` is ignored:
    that protocol fixes the z-axis amplitude to the random u_ij ~ U[-1, 1]
    draw and keeps the transverse axes at zero.
    """
    if mode not in MODES:
        raise ValueError(f"unknown coupling mode: {mode!r} (expected one of {MODES})")
    if alpha < 0:
        raise ValueError(f"power-law exponent must be non-negative, got {alpha}")
    if mode == "disordered_powerlaw":
        if seed is None:
            raise ValueError("disordered_powerlaw requires an explicit seed")
        return sample_disorder(lattice, alpha, seed)

    jx, jy, jz = (float(c) for c in couplings)
    if mode == "powerlaw":
        w = _powerlaw_weights(lattice, alpha)
    else:  # nearest_neighbor: adjacency of the lattice graph, alpha unused
        w = np.zeros((lattice.n_sites, lattice.n_sites))
        for i, j in lattice.neighbor_pairs():
            w[i, j] = w[j, i] = 1.0
    return CouplingMatrix(jx * w, jy * w, jz * w, mode=mode, alpha=float(alpha))


def sample_disorder(lattice: LatticeSpec, alpha: float, seed: int) -> CouplingMatrix:
    """Draw a disordered Ising realization: J^z_ij = u_ij / r_ij^alpha.

    One u_ij ~ U[-1, 1] per unordered pair, filled in row-major pair order
    from a counter-based generator, so a given seed reproduces the same
    realization regardless of platform or call history.
    """
    if alpha < 0:
        raise ValueError(f"power-law exponent must be non-negative, got {alpha}")
    n = lattice.n_sites
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    iu, ju = np.triu_indices(n, k=1)
    u = rng.uniform(-1.0, 1.0, size=iu.size)
    jz = np.zeros((n, n))
    jz[iu, ju] = u
    jz += jz.T
    jz *= _powerlaw_weights(lattice, alpha)
    zero = np.zeros_like(jz)
    return CouplingMatrix(zero, zero.copy(), jz, mode="disordered_powerlaw", alpha=float(alpha), seed=seed)


def save_couplings(cm: CouplingMatrix, path) -> None:
    """Write a coupling matrix in the plain-text exchange format.

    Line 1 is a header ``L alpha mode seed`` (seed ``none`` when absent),
    followed by three L x L blocks of rows (x, y, z axes) with full float64
    precision.
    """
    n = cm.n_sites
    seed = "none" if cm.seed is None else str(cm.seed)
    lines = [f"{n} {float(cm.alpha)!r} {cm.mode} {seed}"]
    for mat in (cm.jx, cm.jy, cm.jz):
        for row in mat:
            lines.append(" ".join(repr(float(v)) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_couplings(path) -> CouplingMatrix:
    """Inverse of :func:`save_couplings` (exact float round-trip)."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 4:
            raise ValueError(f"malformed coupling header: {header}")
        n = int(header[0])
        alpha = float(header[1])
        mode = header[2]
        seed = None if header[3] == "none" else int(header[3])
        rows = [[float(v) for v in fh.readline().split()] for _ in range(3 * n)]
    mats = np.asarray(rows).reshape(3, n, n)
    return CouplingMatrix(mats[0], mats[1], mats[2], mode=mode, alpha=alpha, seed=seed)


def parse_size(text: str) -> int | tuple[int, int]:
    """Parse a lattice size field: '32' or '4x4'."""
    m = re.fullmatch(r"(\d+)\s*x\s*(\d+)", text.strip(), flags=re.IGNORECASE)
    if m:
        return (int(m.group(1)), int(m.group(2)))
    return int(text)
