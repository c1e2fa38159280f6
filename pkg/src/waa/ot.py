"""Semidiscrete 2-Wasserstein transport between atoms and a uniform polygon.

For atoms ``x_i`` with masses ``m_i`` and the uniform law on a convex polygon
``Omega``, the dual functional

    Phi(phi) = sum_i phi_i m_i + (1/|Omega|) sum_i int_{cell_i} (|y - x_i|^2 - phi_i) dy

is concave, its gradient is ``m_i - |cell_i| / |Omega|`` and its maximum is
the squared distance W2^2. The cells are the power cells of the atoms
clipped to ``Omega``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial import cKDTree

from . import _netsimplex
from .geometry import ConvexPolygon, HalfPlane, PowerDiagram, area, centroid, clip, power_diagram

log = logging.getLogger(__name__)

DEFAULT_MAX_ASCENT = 50_000
ORACLE_MAX_PAIRS = 1_100_000


class SizeError(ValueError):
    """Raised when an exact discrete transport instance is too large."""


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted Dirac atoms in one or two dimensions.

    Masses must be positive and sum to one; use :meth:`from_weights` to
    normalise arbitrary non-negative weights (zero weights are dropped).
    """

    points: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.array(self.masses, dtype=float).ravel()
        if pts.ndim != 2 or pts.shape[1] not in (1, 2):
            raise ValueError(f"points must be (n, 1) or (n, 2), got {pts.shape}")
        if pts.shape[0] == 0 or w.shape[0] != pts.shape[0]:
            raise ValueError("need one positive mass per point")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(w))):
            raise ValueError("points and masses must be finite")
        if np.any(w <= 0):
            raise ValueError("masses must be positive")
        if abs(w.sum() - 1.0) > 1e-10:
            raise ValueError(f"masses sum to {w.sum()!r}, expected 1")
        if pts.shape[0] > 1:
            scale = max(float(np.ptp(pts, axis=0).max()), 1.0)
            if cKDTree(pts).query_pairs(1e-12 * scale):
                raise ValueError("duplicate atoms; merge them first")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "masses", w)

    @classmethod
    def from_weights(cls, points, weights=None) -> "DiscreteMeasure":
        """Normalise weights, drop zero-weight atoms and merge duplicates."""
        pts = np.array(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.ones(len(pts)) if weights is None else np.array(weights, dtype=float)
        if np.any(w < 0):
            raise ValueError("weights must be non-negative")
        keep = w > 0
        pts, w = pts[keep], w[keep]
        uniq, inv = np.unique(pts, axis=0, return_inverse=True)
        merged = np.bincount(inv.ravel(), weights=w, minlength=len(uniq))
        return cls(uniq, merged / merged.sum())

    @classmethod
    def uniform(cls, points) -> "DiscreteMeasure":
        return cls.from_weights(points)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def mean(self) -> np.ndarray:
        return self.masses @ self.points

    def covariance(self) -> np.ndarray:
        d = self.points - self.mean()
        return (d * self.masses[:, None]).T @ d

    def std(self) -> float:
        """Root-mean-square per-axis standard deviation."""
        return float(np.sqrt(np.trace(self.covariance()) / self.dim))

    def transformed(self, rotation=None, shift=(0.0, 0.0), scale: float = 1.0):
        pts = self.points * scale
        if rotation is not None:
            pts = pts @ np.asarray(rotation, dtype=float).T
        return DiscreteMeasure(pts + np.asarray(shift, dtype=float), self.masses)


@dataclass
class DualAscentReport:
    phi_star: np.ndarray
    iterations: int
    final_residual: float  # l1 norm of the mass mismatch at phi_star
    w2_squared: float
    converged: bool
    diagram: Optional[PowerDiagram] = None


def _check_2d(mu: DiscreteMeasure, phi) -> np.ndarray:
    if mu.dim != 2:
        raise ValueError("semidiscrete transport needs a 2D measure")
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (mu.n,):
        raise ValueError(f"phi has shape {phi.shape}, expected ({mu.n},)")
    if not np.all(np.isfinite(phi)):
        raise ValueError("phi must be finite")
    return phi


def _objective_from_diagram(mu: DiscreteMeasure, pd: PowerDiagram, omega_area: float) -> float:
    return float(pd.phi @ mu.masses
                 + (pd.second_moments.sum() - pd.phi @ pd.areas) / omega_area)


def dual_objective(mu: DiscreteMeasure, omega: ConvexPolygon, phi) -> float:
    phi = _check_2d(mu, phi)
    pd = power_diagram(mu.points, phi, omega)
    return _objective_from_diagram(mu, pd, area(omega))


def dual_gradient(mu: DiscreteMeasure, omega: ConvexPolygon, phi) -> np.ndarray:
    phi = _check_2d(mu, phi)
    pd = power_diagram(mu.points, phi, omega)
    return mu.masses - pd.areas / area(omega)


def dual_ascent(mu: DiscreteMeasure, omega: ConvexPolygon, phi0=None, tau1: float = 0.5,
                delta1: float = 1e-3, max_iter: int = DEFAULT_MAX_ASCENT) -> DualAscentReport:
    """Fixed-step gradient ascent on the dual potential.

    Each step moves ``phi += tau1 * (m - |cell| / |Omega|)`` and stops once
    the l1 size of that update is at most ``delta1``. The potential returned is
    the one whose gradient passed the test, so its mass mismatch is at most
    ``delta1 / tau1``.
    """
    if tau1 <= 0 or delta1 <= 0:
        raise ValueError("tau1 and delta1 must be positive")
    phi = np.zeros(mu.n) if phi0 is None else _check_2d(mu, phi0).copy()
    omega_area = area(omega)
    converged = False
    it = 0
    while True:
        pd = power_diagram(mu.points, phi, omega)
        grad = mu.masses - pd.areas / omega_area
        it += 1
        if tau1 * np.abs(grad).sum() <= delta1:
            converged = True
            break
        if it >= max_iter:
            log.debug("dual ascent stopped after %d iterations (residual %.3g)",
                        it, np.abs(grad).sum())
            break
        phi = phi + tau1 * grad
    w2sq = _objective_from_diagram(mu, pd, omega_area)
    if -1e-9 <= w2sq < 0:
        w2sq = 0.0
    return DualAscentReport(phi, it, float(np.abs(grad).sum()), w2sq, converged, pd)


def w2_semidiscrete(mu: DiscreteMeasure, omega: ConvexPolygon, cfg=None, phi0=None) -> float:
    """W2 between ``mu`` and the uniform law on ``omega``.

    ``cfg`` supplies ``tau1``, ``delta1`` and ``max_inner``; anything without
    those attributes falls back to the defaults.
    """
    rep = dual_ascent(mu, omega, phi0,
                      tau1=getattr(cfg, "tau1", 0.5),
                      delta1=getattr(cfg, "delta1", 1e-3),
                      max_iter=getattr(cfg, "max_inner", DEFAULT_MAX_ASCENT))
    return float(np.sqrt(max(0.0, rep.w2_squared)))


def discrete_ot_oracle(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """Exact squared W2 between two discrete measures.

    Equal-mass instances of equal size go through the assignment solver;
    everything else through a network simplex on the transportation problem.
    """
    if mu.dim != nu.dim:
        raise ValueError("measures live in different dimensions")
    n, m = mu.n, nu.n
    C = ((mu.points[:, None, :] - nu.points[None, :, :]) ** 2).sum(-1)
    if n == m and np.ptp(mu.masses) <= 1e-15 and np.ptp(nu.masses) <= 1e-15:
        if n * m > 16 * ORACLE_MAX_PAIRS:
            raise SizeError(f"{n} x {m} assignment is too large")
        r, c = linear_sum_assignment(C)
        return float(C[r, c].sum() / n)
    if n * m > ORACLE_MAX_PAIRS:
        raise SizeError(f"{n} x {m} transport problem exceeds {ORACLE_MAX_PAIRS} pairs")
    _, cost, _, status = _netsimplex.transport_simplex(
        np.ascontiguousarray(mu.masses), np.ascontiguousarray(nu.masses),
        np.ascontiguousarray(C), 200 * (n + m) + 10_000)
    if status != 0:
        raise RuntimeError("network simplex hit its pivot limit")
    return float(cost)


def quantize_polygon(omega: ConvexPolygon, resolution: int = 128) -> DiscreteMeasure:
    """Grid quantisation of the uniform law on ``omega``.

    The bounding box is cut into ``resolution x resolution`` cells; each cell
    meeting ``omega`` becomes an atom at the centroid of the overlap carrying
    the overlap area as mass. Only cells touched by the boundary are clipped.
    """
    lo = omega.vertices.min(0)
    hi = omega.vertices.max(0)
    xs = np.linspace(lo[0], hi[0], resolution + 1)
    ys = np.linspace(lo[1], hi[1], resolution + 1)
    hx = xs[1] - xs[0]
    hy = ys[1] - ys[0]

    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    corner_in = omega.contains(np.column_stack([gx.ravel(), gy.ravel()])).reshape(gx.shape)
    interior = corner_in[:-1, :-1] & corner_in[1:, :-1] & corner_in[:-1, 1:] & corner_in[1:, 1:]

    touched = np.zeros_like(interior)
    step = 0.25 * min(hx, hy)
    for p0, p1 in zip(omega.vertices, np.roll(omega.vertices, -1, axis=0)):
        count = int(np.ceil(np.hypot(*(p1 - p0)) / step)) + 1
        t = np.linspace(0.0, 1.0, count)[:, None]
        q = p0 + t * (p1 - p0)
        ia = np.clip(((q[:, 0] - lo[0]) / hx).astype(int), 0, resolution - 1)
        ib = np.clip(((q[:, 1] - lo[1]) / hy).astype(int), 0, resolution - 1)
        for da in (-1, 0, 1):
            for db in (-1, 0, 1):
                touched[np.clip(ia + da, 0, resolution - 1), np.clip(ib + db, 0, resolution - 1)] = True
    touched &= ~interior

    ia, ib = np.nonzero(interior)
    pts = [np.column_stack([(xs[ia] + xs[ia + 1]) / 2, (ys[ib] + ys[ib + 1]) / 2])]
    wts = [np.full(ia.size, hx * hy)]
    extra_pts = []
    extra_wts = []
    for a, b in zip(*np.nonzero(touched)):
        piece = omega
        for hp in (HalfPlane((1.0, 0.0), xs[a + 1]), HalfPlane((-1.0, 0.0), -xs[a]),
                   HalfPlane((0.0, 1.0), ys[b + 1]), HalfPlane((0.0, -1.0), -ys[b])):
            piece = clip(piece, hp)
            if piece is None:
                break
        if piece is not None:
            extra_pts.append(centroid(piece))
            extra_wts.append(area(piece))
    if extra_pts:
        pts.append(np.array(extra_pts))
        wts.append(np.array(extra_wts))
    return DiscreteMeasure.from_weights(np.vstack(pts), np.concatenate(wts))


def quantize_triangle(vertices, levels: int) -> DiscreteMeasure:
    """Equal-mass quantisation of a uniform triangle by midpoint subdivision.

    ``levels`` rounds of splitting give ``4**levels`` congruent triangles;
    each contributes its centroid with mass ``4**-levels``.
    """
    if levels < 0:
        raise ValueError("levels must be non-negative")
    tris = np.asarray(vertices, dtype=float).reshape(1, 3, 2)
    for _ in range(levels):
        a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
        ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
        tris = np.concatenate([
            np.stack([a, ab, ca], 1), np.stack([ab, b, bc], 1),
            np.stack([ca, bc, c], 1), np.stack([bc, ca, ab], 1),
        ])
    pts = tris.mean(axis=1)
    return DiscreteMeasure(pts, np.full(len(pts), 1.0 / len(pts)))
