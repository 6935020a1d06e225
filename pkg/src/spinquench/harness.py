"""Experiment orchestration: run configs, backend comparison, and presets.

A run is described by a flat INI file (sections ``[run]``, ``[mlmctdh]``,
``[dtwa]``, ``[ed]``) naming the lattice, the model, the time grid, and the
backends to compare.  ``run`` propagates every requested backend on the same
coupling matrix and time grid, writes one CSV per backend plus a JSON summary
of the maximum pairwise deviations per column, and exits nonzero on any
backend failure.  ``converge`` rescans the tree ansatz over a list of
bottleneck SPF counts against an exact reference, ``preset`` emits ready-made
configs for the production figure panels, and ``compare`` diffs existing CSV
files.

Disorder ensembles evaluate one coupling realization per seed and feed the
identical matrix to every backend, so cross-backend deviations are never
contaminated by different draws.  Realizations run in a process pool when
``SPINQUENCH_WORKERS`` is set above one; all outputs are written atomically
(temp file + rename) and re-running a config with the same seeds reproduces
byte-identical CSVs.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import re
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import dtwa, ed, ising
from . import tree as ml
from .hamiltonian import heisenberg_terms
from .lattice import build_couplings, build_lattice, parse_size
from .observables import ObservableSeries, assemble, ensemble_average, read_csv, write_csv

MODELS = ("ising", "xyz", "disordered_ising")
MODES = ("powerlaw", "nearest_neighbor", "disordered_powerlaw")
BACKENDS = ("mlmctdh", "dtwa", "ed", "oracle")
ENTROPY_CUTS = ("none", "quarter", "half")
LEAF_GROUPINGS = ("contiguous", "plaquette")
WORKERS_ENV = "SPINQUENCH_WORKERS"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class ConfigError(ValueError):
    """Raised for malformed or inconsistent run configurations."""


@dataclass(frozen=True)
class RunConfig:
    """Declarative description of one backend-comparison experiment."""

    geometry: str
    size: int | tuple[int, int]
    model: str
    mode: str
    backends: tuple[str, ...]
    output: str
    alpha: float = 0.0
    couplings: tuple[float, float, float] = (0.0, 0.0, 1.0)
    t_max: float = 3.0
    t_step: float = 0.02
    realizations: int = 1
    base_seed: int = 0
    tree: str | None = None
    leaf_groups: str = "contiguous"
    entropy_cut: str = "none"
    n_trajectories: int = 10000
    dtwa_dt: float = 0.005
    ed_max_sites: int = 16

    @property
    def n_sites(self) -> int:
        if isinstance(self.size, tuple):
            return int(np.prod(self.size))
        return int(self.size)

    def time_grid(self) -> np.ndarray:
        n_steps = int(round(self.t_max / self.t_step))
        if n_steps < 1 or abs(n_steps * self.t_step - self.t_max) > 1e-9:
            raise ConfigError(
                f"t_max={self.t_max} must be a positive integer multiple of t_step={self.t_step}"
            )
        return np.arange(n_steps + 1) * self.t_step

    def entropy_sites(self) -> tuple[int, ...] | None:
        if self.entropy_cut == "none":
            return None
        divisor = 4 if self.entropy_cut == "quarter" else 2
        if self.n_sites % divisor:
            raise ConfigError(
                f"entropy_cut={self.entropy_cut!r} needs L divisible by {divisor}, got L={self.n_sites}"
            )
        return tuple(range(self.n_sites // divisor))


def _site_groups(config: RunConfig):
    if config.leaf_groups == "contiguous":
        return None
    if not isinstance(config.size, tuple):
        raise ConfigError("leaf_groups=plaquette requires a square2D lattice")
    return ml.plaquette_groups(*config.size)


def validate_config(config: RunConfig) -> None:
    """Check internal consistency; raise ConfigError with a precise message."""
    if config.geometry not in ("chain1D", "square2D"):
        raise ConfigError(f"unknown geometry {config.geometry!r}")
    if config.model not in MODELS:
        raise ConfigError(f"unknown model {config.model!r}; expected one of {MODELS}")
    if config.mode not in MODES:
        raise ConfigError(f"unknown mode {config.mode!r}; expected one of {MODES}")
    if (config.model == "disordered_ising") != (config.mode == "disordered_powerlaw"):
        raise ConfigError(
            "model 'disordered_ising' and mode 'disordered_powerlaw' must be used together"
        )
    jx, jy, _jz = config.couplings
    if config.model in ("ising", "disordered_ising") and (jx != 0.0 or jy != 0.0):
        raise ConfigError(f"model {config.model!r} requires jx = jy = 0, got jx={jx}, jy={jy}")
    if config.model == "xyz" and jx == 0.0 and jy == 0.0:
        raise ConfigError("model 'xyz' requires a nonzero jx or jy (otherwise use 'ising')")
    if not config.backends:
        raise ConfigError("at least one backend is required")
    for backend in config.backends:
        if backend not in BACKENDS:
            raise ConfigError(f"unknown backend {backend!r}; expected subset of {BACKENDS}")
    if len(set(config.backends)) != len(config.backends):
        raise ConfigError(f"duplicate backend in {config.backends}")
    if "oracle" in config.backends and config.model == "xyz":
        raise ConfigError("backend 'oracle' is only valid when jx = jy = 0 (Ising models)")
    if "ed" in config.backends and config.n_sites > config.ed_max_sites:
        raise ConfigError(
            f"backend 'ed' is limited to {config.ed_max_sites} sites, got L={config.n_sites}"
        )
    if config.realizations < 1:
        raise ConfigError(f"realizations must be >= 1, got {config.realizations}")
    if config.realizations > 1 and config.model != "disordered_ising":
        raise ConfigError("realizations > 1 only applies to model 'disordered_ising'")
    if config.t_max <= 0 or config.t_step <= 0:
        raise ConfigError("t_max and t_step must be positive")
    config.time_grid()
    if config.alpha < 0:
        raise ConfigError(f"alpha must be >= 0, got {config.alpha}")
    if config.n_trajectories < 2:
        raise ConfigError("n_trajectories must be >= 2 (standard errors need ddof=1)")
    if config.dtwa_dt <= 0:
        raise ConfigError("dtwa dt must be positive")
    if config.leaf_groups not in LEAF_GROUPINGS:
        raise ConfigError(f"unknown leaf_groups {config.leaf_groups!r}")
    if config.entropy_cut not in ENTROPY_CUTS:
        raise ConfigError(f"unknown entropy_cut {config.entropy_cut!r}")
    try:
        build_lattice(config.geometry, config.size)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid lattice: {exc}") from exc
    if "mlmctdh" in config.backends:
        if config.tree is None:
            raise ConfigError("backend 'mlmctdh' requires a tree spec ([mlmctdh] tree = ...)")
        try:
            topology = ml.parse_tree(config.tree, _site_groups(config))
        except ValueError as exc:
            raise ConfigError(f"invalid tree spec: {exc}") from exc
        if topology.n_sites != config.n_sites:
            raise ConfigError(
                f"tree spec covers {topology.n_sites} sites but the lattice has {config.n_sites}"
            )
        sites = config.entropy_sites()
        if sites is not None:
            try:
                topology.node_for_cut(sites)
            except ValueError as exc:
                raise ConfigError(
                    f"entropy_cut={config.entropy_cut!r} does not align with the tree: {exc}"
                ) from exc


# ---------------------------------------------------------------------------
# Config file parsing and generation

_RUN_KEYS = {
    "geometry", "size", "model", "mode", "alpha", "jx", "jy", "jz",
    "t_max", "t_step", "backends", "output", "realizations", "base_seed",
}
_SECTION_KEYS = {
    "run": _RUN_KEYS,
    "mlmctdh": {"tree", "leaf_groups", "entropy_cut"},
    "dtwa": {"n_trajectories", "dt"},
    "ed": {"max_sites"},
}


def _get(parser, section, key, cast, default):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key)
    try:
        return cast(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from exc


def load_config(path) -> RunConfig:
    """Parse and validate an INI run configuration."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    for section in parser.sections():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"unknown section [{section}] (expected {sorted(_SECTION_KEYS)})")
        unknown = set(parser.options(section)) - _SECTION_KEYS[section]
        if unknown:
            raise ConfigError(f"unknown key(s) {sorted(unknown)} in section [{section}]")
    if not parser.has_section("run"):
        raise ConfigError("config must contain a [run] section")
    for key in ("geometry", "size", "model", "mode", "backends", "output"):
        if not parser.has_option("run", key):
            raise ConfigError(f"[run] is missing required key {key!r}")
    try:
        size = parse_size(parser.get("run", "size"))
    except ValueError as exc:
        raise ConfigError(f"[run] size: {exc}") from exc
    backends = tuple(
        token.strip() for token in parser.get("run", "backends").split(",") if token.strip()
    )
    config = RunConfig(
        geometry=parser.get("run", "geometry").strip(),
        size=size,
        model=parser.get("run", "model").strip(),
        mode=parser.get("run", "mode").strip(),
        backends=backends,
        output=parser.get("run", "output").strip(),
        alpha=_get(parser, "run", "alpha", float, 0.0),
        couplings=(
            _get(parser, "run", "jx", float, 0.0),
            _get(parser, "run", "jy", float, 0.0),
            _get(parser, "run", "jz", float, 1.0),
        ),
        t_max=_get(parser, "run", "t_max", float, 3.0),
        t_step=_get(parser, "run", "t_step", float, 0.02),
        realizations=_get(parser, "run", "realizations", int, 1),
        base_seed=_get(parser, "run", "base_seed", int, 0),
        tree=_get(parser, "mlmctdh", "tree", str, None) if parser.has_section("mlmctdh") else None,
        leaf_groups=_get(parser, "mlmctdh", "leaf_groups", str, "contiguous"),
        entropy_cut=_get(parser, "mlmctdh", "entropy_cut", str, "none"),
        n_trajectories=_get(parser, "dtwa", "n_trajectories", int, 10000),
        dtwa_dt=_get(parser, "dtwa", "dt", float, 0.005),
        ed_max_sites=_get(parser, "ed", "max_sites", int, 16),
    )
    validate_config(config)
    return config


def config_text(config: RunConfig, header: str | None = None) -> str:
    """Render a RunConfig as INI text that load_config parses back equal."""
    size = "x".join(str(s) for s in config.size) if isinstance(config.size, tuple) else str(config.size)
    lines = []
    if header:
        lines.extend(f"# {line}" for line in header.splitlines())
    lines += [
        "[run]",
        f"geometry = {config.geometry}",
        f"size = {size}",
        f"model = {config.model}",
        f"mode = {config.mode}",
        f"alpha = {config.alpha!r}",
        f"jx = {config.couplings[0]!r}",
        f"jy = {config.couplings[1]!r}",
        f"jz = {config.couplings[2]!r}",
        f"t_max = {config.t_max!r}",
        f"t_step = {config.t_step!r}",
        f"backends = {', '.join(config.backends)}",
        f"output = {config.output}",
        f"realizations = {config.realizations}",
        f"base_seed = {config.base_seed}",
    ]
    if config.tree is not None:
        lines += [
            "",
            "[mlmctdh]",
            f"tree = {config.tree}",
            f"leaf_groups = {config.leaf_groups}",
            f"entropy_cut = {config.entropy_cut}",
        ]
    lines += [
        "",
        "[dtwa]",
        f"n_trajectories = {config.n_trajectories}",
        f"dt = {config.dtwa_dt!r}",
        "",
        "[ed]",
        f"max_sites = {config.ed_max_sites}",
    ]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Backend series builders (one coupling matrix in, one ObservableSeries out)

def _oracle_series(cm, config, t_grid, seed):
    case = ising.as_ising_case(cm)
    sx, dsx = ising.collective_series(case, t_grid)
    return ObservableSeries(
        t_grid=t_grid.copy(), sx=sx, dsx=dsx, metadata={"backend": "oracle"}
    )


def _ed_series(cm, config, t_grid, seed):
    terms = heisenberg_terms(cm)
    initial = ed.prepare_x_polarized(config.n_sites, max_sites=config.ed_max_sites)
    states = ed.propagate(initial, terms, t_grid)
    sites = config.entropy_sites()
    sx = np.empty(t_grid.size)
    dsx = np.empty(t_grid.size)
    svn = np.empty(t_grid.size) if sites is not None else None
    energies = np.empty(t_grid.size)
    for k, state in enumerate(states):
        one, two = ed.pauli_x_expectations(state)
        sx[k], dsx[k] = assemble(one, two)
        energies[k] = ed.expectation(state, terms)
        if svn is not None:
            svn[k] = ed.von_neumann_entropy(ed.reduced_density(state, sites).matrix)
    drift = float(np.abs(energies - energies[0]).max())
    return ObservableSeries(
        t_grid=t_grid.copy(),
        sx=sx,
        dsx=dsx,
        svn=svn,
        metadata={"backend": "ed", "energy_drift": drift},
    )


def _mlmctdh_series(cm, config, t_grid, seed):
    topology = ml.parse_tree(config.tree, _site_groups(config))
    engine = ml.TreeEngine(topology, heisenberg_terms(cm))
    snapshots = engine.propagate(ml.build_initial_state(topology), t_grid)
    sites = config.entropy_sites()
    sx = np.empty(t_grid.size)
    dsx = np.empty(t_grid.size)
    svn = np.empty(t_grid.size) if sites is not None else None
    tail = np.empty(t_grid.size)
    energies = np.empty(t_grid.size)
    residual = 0.0
    for k, state in enumerate(snapshots):
        one, two = ml.measure_x(state)
        sx[k], dsx[k] = assemble(one, two)
        tail[k] = ml.natural_population_tail(state)
        energies[k] = engine.energy(state)
        residual = max(residual, ml.orthonormality_residual(state))
        if svn is not None:
            svn[k] = ml.entanglement_entropy(state, sites)
    drift = float(np.abs(energies - energies[0]).max())
    return ObservableSeries(
        t_grid=t_grid.copy(),
        sx=sx,
        dsx=dsx,
        svn=svn,
        natpop_tail=tail,
        metadata={
            "backend": "mlmctdh",
            "tree": config.tree,
            "energy_drift": drift,
            "orthonormality_residual": residual,
        },
    )


def _dtwa_series(cm, config, t_grid, seed):
    spec = dtwa.EnsembleSpec(
        n_trajectories=config.n_trajectories, seed=seed, dt=config.dtwa_dt
    )
    result = dtwa.run_ensemble(cm, spec, t_grid)
    return ObservableSeries(
        t_grid=t_grid.copy(),
        sx=result.sx,
        dsx=result.dsx,
        sx_err=result.sx_sem,
        dsx_err=result.dsx_sem,
        metadata={
            "backend": "dtwa",
            "n_trajectories": config.n_trajectories,
            "spin_norm_drift": result.max_spin_norm_drift,
            "energy_drift": result.max_energy_drift,
        },
    )


_BUILDERS = {
    "oracle": _oracle_series,
    "ed": _ed_series,
    "mlmctdh": _mlmctdh_series,
    "dtwa": _dtwa_series,
}

_DRIFT_KEYS = ("energy_drift", "spin_norm_drift", "orthonormality_residual")


def _realization_series(config: RunConfig, seed: int) -> dict[str, ObservableSeries]:
    """All requested backends on the single coupling realization for ``seed``."""
    t_grid = config.time_grid()
    lattice = build_lattice(config.geometry, config.size)
    if config.model == "disordered_ising":
        cm = build_couplings(lattice, config.mode, config.alpha, config.couplings, seed=seed)
    else:
        cm = build_couplings(lattice, config.mode, config.alpha, config.couplings)
    out = {}
    for backend in config.backends:
        series = _BUILDERS[backend](cm, config, t_grid, seed)
        if config.model == "disordered_ising":
            series.metadata["seed"] = seed
        out[backend] = series
    return out


def _worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        count = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{WORKERS_ENV}={raw!r} is not an integer") from exc
    if count < 1:
        raise ConfigError(f"{WORKERS_ENV} must be >= 1, got {count}")
    return count


def _collect_realizations(config: RunConfig) -> dict[str, list[ObservableSeries]]:
    seeds = [config.base_seed + r for r in range(config.realizations)]
    workers = min(_worker_count(), len(seeds))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_seed = list(pool.map(_realization_series, [config] * len(seeds), seeds))
    else:
        per_seed = [_realization_series(config, seed) for seed in seeds]
    return {
        backend: [result[backend] for result in per_seed] for backend in config.backends
    }


def _aggregate(members: list[ObservableSeries]) -> ObservableSeries:
    if len(members) == 1:
        return members[0]
    averaged = ensemble_average(members)
    for key in _DRIFT_KEYS:
        values = [float(s.metadata[key]) for s in members if key in s.metadata]
        if values:
            averaged.metadata[key] = max(values)
    return averaged


def _atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _atomic_write_csv(series: ObservableSeries, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    os.close(fd)
    try:
        write_csv(series, tmp)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _pairwise_deviations(by_backend: dict[str, ObservableSeries]) -> dict:
    names = list(by_backend)
    deviations: dict[str, dict[str, float]] = {}
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            cols_a = by_backend[a].columns
            cols_b = by_backend[b].columns
            for column in cols_a:
                if column == "t" or column.endswith("_err") or column not in cols_b:
                    continue
                gap = float(np.abs(cols_a[column] - cols_b[column]).max())
                deviations.setdefault(column, {})[f"{a}-vs-{b}"] = gap
    return deviations


def run(config: RunConfig) -> dict:
    """Propagate every backend, write per-backend CSVs and a deviation summary."""
    validate_config(config)
    collected = _collect_realizations(config)
    by_backend = {backend: _aggregate(members) for backend, members in collected.items()}
    outdir = Path(config.output)
    files = {}
    for backend, series in by_backend.items():
        path = outdir / f"{backend}.csv"
        _atomic_write_csv(series, path)
        files[backend] = str(path)
    summary = {
        "backends": list(config.backends),
        "t_points": int(config.time_grid().size),
        "realizations": config.realizations,
        "files": files,
        "max_abs_deviation": _pairwise_deviations(by_backend),
    }
    _atomic_write_text(outdir / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


# ---------------------------------------------------------------------------
# Convergence scans

_LAST_LABEL = re.compile(r"\[(\d+)\](?!.*\[)")


def with_bottleneck(tree_text: str, m: int) -> str:
    """Replace the last (bottleneck) SPF count in a tree spec string."""
    if not _LAST_LABEL.search(tree_text):
        raise ConfigError(f"tree spec {tree_text!r} has no [m] label to scan")
    return _LAST_LABEL.sub(f"[{m}]", tree_text)


def converge(config: RunConfig, m_values: list[int]) -> dict:
    """Scan the bottleneck SPF count against an exact reference backend."""
    validate_config(config)
    if "mlmctdh" not in config.backends:
        raise ConfigError("converge requires the 'mlmctdh' backend in the config")
    if not m_values:
        raise ConfigError("converge requires at least one m value")
    if any(m < 1 for m in m_values):
        raise ConfigError(f"m values must be >= 1, got {m_values}")
    if "ed" in config.backends:
        reference = "ed"
    elif "oracle" in config.backends:
        reference = "oracle"
    else:
        raise ConfigError("converge needs an exact reference backend ('ed' or 'oracle')")
    t_grid = config.time_grid()
    lattice = build_lattice(config.geometry, config.size)
    seed = config.base_seed
    if config.model == "disordered_ising":
        cm = build_couplings(lattice, config.mode, config.alpha, config.couplings, seed=seed)
    else:
        cm = build_couplings(lattice, config.mode, config.alpha, config.couplings)
    ref_series = _BUILDERS[reference](cm, config, t_grid, seed)
    rows = []
    previous = None
    for m in m_values:
        scan_config = replace(config, tree=with_bottleneck(config.tree, m), entropy_cut="none")
        try:
            ml.parse_tree(scan_config.tree, _site_groups(scan_config))
        except ValueError as exc:
            raise ConfigError(f"m={m}: {exc}") from exc
        series = _mlmctdh_series(cm, scan_config, t_grid, seed)
        deviation = float(np.abs(series.sx - ref_series.sx).max())
        rows.append(
            {
                "m": int(m),
                "tree": scan_config.tree,
                "max_abs_dev_sx": deviation,
                "non_monotone": previous is not None and deviation > previous,
            }
        )
        previous = deviation
    report = {"reference": reference, "rows": rows}
    outdir = Path(config.output)
    _atomic_write_text(outdir / "converge.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report


# ---------------------------------------------------------------------------
# Presets for the production figure panels

_PANEL_ALPHA = {0: 0.0, 1: 3.0, 2: 6.0}


def _preset_entries():
    entries = {}

    def add(panel, column, **kwargs):
        entries[panel] = (column, kwargs)

    # Collective revival panels: clean power-law Ising chain, L=32.
    for row, column in enumerate(("sx", "dsx", "svn")):
        for col in range(3):
            alpha = _PANEL_ALPHA[col]
            add(
                f"fig2{'abcdefghi'[3 * row + col]}",
                column,
                geometry="chain1D",
                size=32,
                model="ising",
                mode="powerlaw",
                alpha=alpha,
                couplings=(0.0, 0.0, 1.0),
                backends=("mlmctdh", "dtwa", "oracle"),
                tree="32->[2]16->[4]4->[12]1",
                entropy_cut="quarter",
                dtwa_dt=0.001 if alpha == 0.0 else 0.005,
            )

    # Disorder-averaged Ising chain, L=32, 100 coupling realizations.
    def disordered(alpha):
        return dict(
            geometry="chain1D",
            size=32,
            model="disordered_ising",
            mode="disordered_powerlaw",
            alpha=alpha,
            couplings=(0.0, 0.0, 1.0),
            realizations=100,
            base_seed=0,
            tree="32->[2]16->[4]4->[22]1" if alpha == 0.0 else "32->[2]16->[4]4->[16]1",
            dtwa_dt=0.001 if alpha == 0.0 else 0.005,
        )

    for row, column in enumerate(("sx", "dsx")):
        for col in range(3):
            add(
                f"fig3{'abcdef'[3 * row + col]}",
                column,
                backends=("mlmctdh", "dtwa", "oracle"),
                **disordered(_PANEL_ALPHA[col]),
            )
    for row, column in enumerate(("natpop_tail", "svn")):
        for col in range(3):
            add(
                f"fig4{'abcdef'[3 * row + col]}",
                column,
                backends=("mlmctdh", "oracle"),
                entropy_cut="quarter",
                **disordered(_PANEL_ALPHA[col]),
            )

    # Anisotropic XYZ chain, L=16, against exact diagonalization.
    for row, column in enumerate(("sx", "dsx")):
        for col in range(3):
            alpha = _PANEL_ALPHA[col]
            add(
                f"fig5{'abcdef'[3 * row + col]}",
                column,
                geometry="chain1D",
                size=16,
                model="xyz",
                mode="powerlaw",
                alpha=alpha,
                couplings=(0.5, 1.0, 0.25),
                backends=("mlmctdh", "dtwa", "ed"),
                tree="16->[2]4->[10]1" if alpha == 0.0 else "16->[2]4->[12]1",
                dtwa_dt=0.001 if alpha == 0.0 else 0.005,
            )

    # Nearest-neighbor panels: long chain and 4x4 square lattice.
    nn_chain = dict(
        geometry="chain1D",
        size=128,
        model="ising",
        mode="nearest_neighbor",
        couplings=(0.0, 0.0, 1.0),
        backends=("mlmctdh", "dtwa", "oracle"),
        tree="128->[2]64->[4]16->[10]4->[18]1",
    )
    nn_square_ising = dict(
        geometry="square2D",
        size=(4, 4),
        model="ising",
        mode="nearest_neighbor",
        couplings=(0.0, 0.0, 1.0),
        backends=("mlmctdh", "dtwa", "ed", "oracle"),
        tree="16->[2]4->[8]1",
        leaf_groups="plaquette",
    )
    nn_square_xyz = dict(
        geometry="square2D",
        size=(4, 4),
        model="xyz",
        mode="nearest_neighbor",
        couplings=(0.5, 1.0, 0.25),
        backends=("mlmctdh", "dtwa", "ed"),
        tree="16->[2]4->[14]1",
        leaf_groups="plaquette",
    )
    for row, column in enumerate(("sx", "dsx")):
        add(f"fig6{'ad'[row]}", column, **nn_chain)
        add(f"fig6{'be'[row]}", column, **nn_square_ising)
        add(f"fig6{'cf'[row]}", column, **nn_square_xyz)

    return entries


_PRESETS = _preset_entries()
PRESET_IDS = tuple(sorted(_PRESETS))


def preset_config(figure_id: str) -> RunConfig:
    """The RunConfig behind a production figure panel id (fig2a..fig6f)."""
    if figure_id not in _PRESETS:
        raise ConfigError(
            f"unknown preset {figure_id!r}; available: {', '.join(PRESET_IDS)}"
        )
    _, kwargs = _PRESETS[figure_id]
    config = RunConfig(output=f"runs/{figure_id}", **kwargs)
    validate_config(config)
    return config


def preset_text(figure_id: str) -> str:
    """INI text for a preset, annotated with the panel's plotted column."""
    column, _ = _PRESETS[figure_id] if figure_id in _PRESETS else (None, None)
    config = preset_config(figure_id)
    return config_text(config, header=f"preset {figure_id}: plotted column '{column}'")


# ---------------------------------------------------------------------------
# CSV comparison

def compare(paths: list[str]) -> dict:
    """Max pairwise deviations per column across existing CSV files."""
    if len(paths) < 2:
        raise ConfigError("compare needs at least two CSV files")
    by_name = {}
    for path in paths:
        name = Path(path).stem
        if name in by_name:
            name = str(path)
        try:
            by_name[name] = read_csv(path)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
    grids = [s.t_grid for s in by_name.values()]
    for grid in grids[1:]:
        if grid.shape != grids[0].shape or not np.array_equal(grid, grids[0]):
            raise ConfigError("CSV files do not share the same time grid")
    return _pairwise_deviations(by_name)


# ---------------------------------------------------------------------------
# CLI

def _print_deviation_table(deviations: dict, stream=None) -> None:
    stream = stream or sys.stdout
    if not deviations:
        print("no overlapping columns to compare", file=stream)
        return
    width = max(len(pair) for column in deviations.values() for pair in column)
    for column in sorted(deviations):
        for pair, value in sorted(deviations[column].items()):
            print(f"max |d {column}|  {pair:<{width}}  {value:.6e}", file=stream)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="spinquench",
        description="Quench dynamics of long-range spin models: "
        "tree-tensor, semiclassical, exact, and closed-form backends.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="propagate all backends of a config and compare")
    p_run.add_argument("config", help="INI run configuration")
    p_conv = sub.add_parser("converge", help="scan the tree bottleneck SPF count")
    p_conv.add_argument("config", help="INI run configuration")
    p_conv.add_argument("--m", nargs="+", type=int, required=True, help="SPF counts to scan")
    p_preset = sub.add_parser("preset", help="emit a figure-panel config (fig2a..fig6f)")
    p_preset.add_argument("figure_id")
    p_preset.add_argument("-o", "--output", help="write the config here instead of stdout")
    p_cmp = sub.add_parser("compare", help="deviation table for existing CSV files")
    p_cmp.add_argument("csvs", nargs="+", help="CSV files written by 'run'")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG

    try:
        if args.command == "run":
            summary = run(load_config(args.config))
            for backend, path in summary["files"].items():
                print(f"{backend}: {path}")
            _print_deviation_table(summary["max_abs_deviation"])
        elif args.command == "converge":
            report = converge(load_config(args.config), args.m)
            print(f"reference backend: {report['reference']}")
            for row in report["rows"]:
                flag = "  (non-monotone)" if row["non_monotone"] else ""
                print(f"m = {row['m']:>4d}   max |d sx| = {row['max_abs_dev_sx']:.6e}{flag}")
        elif args.command == "preset":
            text = preset_text(args.figure_id)
            if args.output:
                _atomic_write_text(Path(args.output), text)
                print(f"wrote {args.output}")
            else:
                print(text, end="")
        elif args.command == "compare":
            _print_deviation_table(compare(args.csvs))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # propagation/linear-algebra failures
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
