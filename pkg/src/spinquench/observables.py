"""Collective observable series: assembly, ensemble statistics, CSV I/O.

All backends reduce to the same record: collective x magnetization
S_x = sum_i <sigma^x_i> and its variance
Delta S_x = sum_{ij} (<sigma^x_i sigma^x_j> - <sigma^x_i><sigma^x_j>)
on a shared time grid, with optional entanglement entropy, natural-population
tail, and sampling-error columns.  CSV files carry the run metadata in '#'
comment lines and print floats with 17 significant digits so a written series
reads back bit-identically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_FLOAT_FMT = "{:.17g}"
_OPTIONAL_COLUMNS = ("svn", "natpop_tail", "sx_err", "dsx_err")


@dataclass
class ObservableSeries:
    """One backend's collective observables on a time grid.

    Required columns are the grid, S_x, and Delta S_x; entanglement entropy,
    natural-population tail, and standard errors are attached when the
    backend provides them.  ``metadata`` records provenance (backend name,
    coupling fingerprint, seeds, realization counts) and travels with the
    CSV file.
    """

    t_grid: np.ndarray
    sx: np.ndarray
    dsx: np.ndarray
    svn: np.ndarray | None = None
    natpop_tail: np.ndarray | None = None
    sx_err: np.ndarray | None = None
    dsx_err: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t_grid = np.asarray(self.t_grid, dtype=float)
        if self.t_grid.ndim != 1:
            raise ValueError("time grid must be one-dimensional")
        for name in ("sx", "dsx", *_OPTIONAL_COLUMNS):
            col = getattr(self, name)
            if col is None:
                continue
            col = np.asarray(col, dtype=float)
            if col.shape != self.t_grid.shape:
                raise ValueError(
                    f"column {name!r} has shape {col.shape}, expected {self.t_grid.shape}"
                )
            setattr(self, name, col)

    @property
    def columns(self) -> dict[str, np.ndarray]:
        out = {"t": self.t_grid, "sx": self.sx, "dsx": self.dsx}
        for name in _OPTIONAL_COLUMNS:
            col = getattr(self, name)
            if col is not None:
                out[name] = col
        return out


def assemble(one_point: np.ndarray, two_point: np.ndarray) -> tuple[float, float]:
    """(S_x, Delta S_x) from one- and two-point x expectations at one time.

    ``two_point`` must carry unit diagonal ((sigma^x)^2 = 1); the variance
    splits into off-diagonal connected correlators plus sum_i (1 - <x_i>^2).
    """
    one_point = np.asarray(one_point, dtype=float)
    two_point = np.asarray(two_point, dtype=float)
    n = one_point.size
    if two_point.shape != (n, n):
        raise ValueError(
            f"two-point matrix shape {two_point.shape} does not match {n} sites"
        )
    sx = float(one_point.sum())
    connected = two_point - np.outer(one_point, one_point)
    dsx = float(connected.sum() - np.trace(connected) + (1.0 - one_point**2).sum())
    return sx, dsx


def ensemble_average(series: list[ObservableSeries]) -> ObservableSeries:
    """Mean over realizations with standard errors of the mean.

    All members must share the time grid.  Optional columns are averaged when
    every member carries them.  Standard errors use the unbiased sample
    standard deviation over realizations (zero for a single member).
    """
    if not series:
        raise ValueError("need at least one series to average")
    t_grid = series[0].t_grid
    for s in series[1:]:
        if s.t_grid.shape != t_grid.shape or not np.allclose(s.t_grid, t_grid):
            raise ValueError("ensemble members must share the time grid")
    n = len(series)
    sx = np.mean([s.sx for s in series], axis=0)
    dsx = np.mean([s.dsx for s in series], axis=0)
    if n > 1:
        sx_err = np.std([s.sx for s in series], axis=0, ddof=1) / np.sqrt(n)
        dsx_err = np.std([s.dsx for s in series], axis=0, ddof=1) / np.sqrt(n)
    else:
        sx_err = np.zeros_like(sx)
        dsx_err = np.zeros_like(dsx)
    kwargs = {}
    for name in ("svn", "natpop_tail"):
        cols = [getattr(s, name) for s in series]
        if all(c is not None for c in cols):
            kwargs[name] = np.mean(cols, axis=0)
    meta = dict(series[0].metadata)
    meta["realizations"] = n
    seeds = [s.metadata.get("seed") for s in series if "seed" in s.metadata]
    if seeds:
        meta["seeds"] = ",".join(str(s) for s in seeds)
        meta.pop("seed", None)
    return ObservableSeries(
        t_grid=t_grid.copy(),
        sx=sx,
        dsx=dsx,
        sx_err=sx_err,
        dsx_err=dsx_err,
        metadata=meta,
        **kwargs,
    )


def write_csv(series: ObservableSeries, path) -> None:
    """Write a series with '#'-prefixed metadata and 17-digit float columns."""
    cols = series.columns
    lines = []
    for key in sorted(series.metadata):
        lines.append(f"# {key} = {series.metadata[key]}")
    lines.append(",".join(cols))
    for k in range(series.t_grid.size):
        lines.append(",".join(_FLOAT_FMT.format(c[k]) for c in cols.values()))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path) -> ObservableSeries:
    """Read a series written by ``write_csv`` (round-trips bit-identically)."""
    metadata: dict = {}
    header: list[str] | None = None
    rows: list[list[float]] = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, value = body.partition("=")
                    metadata[key.strip()] = value.strip()
                continue
            if header is None:
                header = [c.strip() for c in line.split(",")]
                continue
            rows.append([float(v) for v in line.split(",")])
    if header is None or not rows:
        raise ValueError(f"no data rows found in {path}")
    data = np.array(rows, dtype=float)
    if data.shape[1] != len(header):
        raise ValueError(f"ragged CSV: {data.shape[1]} columns vs header {header}")
    by_name = {name: data[:, k] for k, name in enumerate(header)}
    for required in ("t", "sx", "dsx"):
        if required not in by_name:
            raise ValueError(f"missing required column {required!r} in {path}")
    return ObservableSeries(
        t_grid=by_name["t"],
        sx=by_name["sx"],
        dsx=by_name["dsx"],
        svn=by_name.get("svn"),
        natpop_tail=by_name.get("natpop_tail"),
        sx_err=by_name.get("sx_err"),
        dsx_err=by_name.get("dsx_err"),
        metadata=metadata,
    )
