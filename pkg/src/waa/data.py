"""Datasets: CSV I/O, grid binning, synthetic samplers, PCA and k-means."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from sklearn.cluster import KMeans

from .ot import DiscreteMeasure


class RankError(ValueError):
    """Raised when the data has no variance to decompose."""


class DataFormatError(ValueError):
    """Raised on malformed CSV input."""


@dataclass(frozen=True, eq=False)
class RawDataset:
    rows: np.ndarray
    labels: Optional[tuple] = None

    def __post_init__(self):
        X = np.array(self.rows, dtype=float)
        if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
            raise DataFormatError(f"rows must form a non-empty 2D table, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise DataFormatError("rows contain non-finite entries")
        if self.labels is not None and len(self.labels) != X.shape[0]:
            raise DataFormatError("one label per row required")
        X.setflags(write=False)
        object.__setattr__(self, "rows", X)
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))

    @property
    def shape(self):
        return self.rows.shape


@dataclass(frozen=True)
class BinningSpec:
    grid_nx: int = 15
    grid_ny: int = 15

    def __post_init__(self):
        if self.grid_nx < 1 or self.grid_ny < 1:
            raise ValueError("grid dimensions must be at least 1")

    @classmethod
    def parse(cls, text: str) -> "BinningSpec":
        """Read ``"15x15"`` style strings."""
        try:
            nx, ny = (int(s) for s in text.lower().split("x"))
        except ValueError:
            raise ValueError(f"bad grid spec {text!r}, expected NXxNY") from None
        return cls(nx, ny)


def _axis_bins(v: np.ndarray, count: int):
    lo, hi = float(v.min()), float(v.max())
    if hi <= lo:
        return np.zeros(v.size, dtype=np.int64), np.array([lo])
    h = (hi - lo) / count
    idx = np.minimum(((v - lo) / h).astype(np.int64), count - 1)
    return idx, lo + (np.arange(count) + 0.5) * h


def bin_to_measure(points, spec: BinningSpec = BinningSpec()) -> DiscreteMeasure:
    """Histogram on a grid spanning the data bounding box.

    Atoms sit at the centres of non-empty cells with the fraction of points
    in the cell as mass. The top and right edges belong to the last cell.
    """
    P = np.asarray(points, dtype=float)
    if P.ndim != 2 or P.shape[1] != 2 or P.shape[0] == 0:
        raise ValueError("need at least one 2D point")
    ix, cx = _axis_bins(P[:, 0], spec.grid_nx)
    iy, cy = _axis_bins(P[:, 1], spec.grid_ny)
    ny = cy.size
    counts = np.bincount(ix * ny + iy, minlength=cx.size * ny)
    nz = np.flatnonzero(counts)
    atoms = np.column_stack([cx[nz // ny], cy[nz % ny]])
    return DiscreteMeasure(atoms, counts[nz] / P.shape[0])


def sample_uniform_disk(n: int, seed: int = 0) -> np.ndarray:
    """Uniform points on the unit disk via ``sqrt(r) (cos 2 pi t, sin 2 pi t)``."""
    rng = np.random.default_rng(seed)
    r = rng.random(n)
    t = rng.random(n)
    rho = np.sqrt(r)
    return np.column_stack([rho * np.cos(2 * np.pi * t), rho * np.sin(2 * np.pi * t)])


def sample_gaussian(n: int, mean=(0.0, 0.0), cov=((1.0, 0.0), (0.0, 1.0)), seed: int = 0) -> np.ndarray:
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (mean.size, mean.size) or not np.allclose(cov, cov.T):
        raise ValueError("cov must be a symmetric matrix matching mean")
    L = np.linalg.cholesky(cov)  # raises LinAlgError if not positive definite
    z = np.random.default_rng(seed).standard_normal((n, mean.size))
    return mean + z @ L.T


def pca_reduce(data, n_components: int = 2):
    """Scores on the leading principal axes and their explained-variance ratios."""
    X = data.rows if isinstance(data, RawDataset) else np.asarray(data, dtype=float)
    if n_components < 1 or n_components > min(X.shape):
        raise ValueError(f"n_components must be in [1, {min(X.shape)}]")
    Xc = X - X.mean(axis=0)
    U, s, _ = np.linalg.svd(Xc, full_matrices=False)
    total = float((s**2).sum())
    if total <= 1e-24 * max(1.0, float(np.abs(X).max()) ** 2) * X.size:
        raise RankError("data has no variance")
    scores = U[:, :n_components] * s[:n_components]
    return scores, (s[:n_components] ** 2) / total


def kmeans(points, k: int, seed: int = 0) -> np.ndarray:
    P = np.asarray(points, dtype=float)
    if not 1 <= k <= P.shape[0]:
        raise ValueError(f"k must be between 1 and the number of points ({P.shape[0]})")
    km = KMeans(n_clusters=k, init="k-means++", n_init=10, max_iter=500, tol=1e-8,
                random_state=seed).fit(P)
    return km.cluster_centers_


def moving_average_centered(series, window: int = 5) -> np.ndarray:
    """Centred moving average along the last axis; windows shrink near both ends."""
    x = np.asarray(series, dtype=float)
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be a positive odd integer")
    h = window // 2
    n = x.shape[-1]
    c = np.concatenate([np.zeros(x.shape[:-1] + (1,)), np.cumsum(x, axis=-1)], axis=-1)
    idx = np.arange(n)
    lo = np.maximum(idx - h, 0)
    hi = np.minimum(idx + h + 1, n)
    return (c[..., hi] - c[..., lo]) / (hi - lo)


def synthetic_positivity_rows(n_rows: int = 51, n_days: int = 154, n_archetypes: int = 3,
                              noise: float = 0.002, seed: int = 0) -> RawDataset:
    """Stand-in for state-by-day test positivity rates.

    Each row mixes a few smooth archetypal curves with Dirichlet weights and
    adds daily noise; the vertices of the mixing simplex are included so the
    planted archetypes are attained.
    """
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, 1.0, n_days)
    curves = []
    for j in range(n_archetypes):
        peak = 0.2 + 0.6 * j / max(n_archetypes - 1, 1)
        curves.append(0.03 + 0.2 * np.exp(-((t - peak) / 0.12) ** 2))
    curves = np.array(curves)
    w = rng.dirichlet(np.full(n_archetypes, 0.6), size=n_rows)
    w[:n_archetypes] = np.eye(n_archetypes)
    rows = np.clip(w @ curves + noise * rng.standard_normal((n_rows, n_days)), 0.0, 1.0)
    return RawDataset(rows, tuple(f"S{i:02d}" for i in range(n_rows)))


def _read_numeric_rows(path, min_cols: int, max_cols: Optional[int], first_label: bool = False):
    rows, labels = [], []
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not c.strip() for c in rec):
                continue
            cells = rec[1:] if first_label else rec
            try:
                vals = [float(c) for c in cells]
            except ValueError:
                if lineno == 1 and not rows:
                    continue  # header
                raise DataFormatError(f"{path}:{lineno}: non-numeric entry") from None
            if len(vals) < min_cols or (max_cols is not None and len(vals) > max_cols):
                raise DataFormatError(f"{path}:{lineno}: unexpected column count {len(rec)}")
            if rows and len(vals) != len(rows[0]):
                raise DataFormatError(f"{path}:{lineno}: ragged row")
            rows.append(vals)
            if first_label:
                labels.append(rec[0].strip())
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    X = np.array(rows)
    if not np.all(np.isfinite(X)):
        raise DataFormatError(f"{path}: non-finite entry")
    return X, labels


def read_points_csv(path) -> np.ndarray:
    """Two-column ``x,y`` samples (a third mass column is rejected here)."""
    X, _ = _read_numeric_rows(path, 2, 2)
    return X


def read_measure_csv(path) -> DiscreteMeasure:
    """``x,y[,mass]`` rows; masses are normalised, uniform when absent."""
    X, _ = _read_numeric_rows(path, 2, 3)
    if X.shape[1] == 2:
        return DiscreteMeasure.from_weights(X)
    if np.any(X[:, 2] < 0) or X[:, 2].sum() <= 0:
        raise DataFormatError(f"{path}: masses must be non-negative with positive total")
    return DiscreteMeasure.from_weights(X[:, :2], X[:, 2])


def read_column_csv(path) -> np.ndarray:
    X, _ = _read_numeric_rows(path, 1, 1)
    return X[:, 0]


def read_rows_csv(path) -> RawDataset:
    """``label,v1,...,vD`` rows."""
    X, labels = _read_numeric_rows(path, 1, None, first_label=True)
    return RawDataset(X, tuple(labels))


def _fmt(v: float) -> str:
    return repr(float(v))


def write_points_csv(path, points, masses: Optional[Sequence[float]] = None,
                     header: Sequence[str] = ("x", "y")) -> None:
    P = np.asarray(points, dtype=float)
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(header) + (["mass"] if masses is not None else []))
        for i, p in enumerate(P):
            row = [_fmt(c) for c in np.atleast_1d(p)]
            if masses is not None:
                row.append(_fmt(masses[i]))
            w.writerow(row)


def write_rows_csv(path, data: RawDataset) -> None:
    labels = data.labels or tuple(str(i) for i in range(data.shape[0]))
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for lab, row in zip(labels, data.rows):
            w.writerow([lab] + [_fmt(v) for v in row])
