"""Convex polygon primitives and power diagrams clipped to a convex window.

Polygons are stored counterclockwise. The outward normal of the edge
``p0 -> p1`` is ``(dy, -dx) / |p1 - p0|``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels

REL_TOL = 1e-12
AREA_FLOOR_FACTOR = 1e-10

_EMPTY_ORDER = np.empty((0, 0), dtype=np.int64)


class GeometryError(ValueError):
    """Raised for invalid polygons or malformed geometric input."""


def _as_points(vertices) -> np.ndarray:
    pts = np.array(vertices, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise GeometryError(f"expected an (k, 2) array of vertices, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise GeometryError("vertices must be finite")
    return pts


def _shoelace(pts: np.ndarray) -> float:
    x = pts[:, 0] - pts[0, 0]
    y = pts[:, 1] - pts[0, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def diameter(pts: np.ndarray) -> float:
    d = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((d**2).sum(-1).max()))


def convexity_defect(vertices, area_floor: Optional[float] = None) -> Optional[str]:
    """Return a description of why ``vertices`` is not a valid CCW convex polygon.

    Returns None when the polygon is valid.
    """
    pts = np.asarray(vertices, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        return "need at least 3 vertices"
    if not np.all(np.isfinite(pts)):
        return "non-finite vertex"
    scale = diameter(pts)
    if scale == 0.0:
        return "all vertices coincide"
    edges = np.roll(pts, -1, axis=0) - pts
    lengths = np.hypot(edges[:, 0], edges[:, 1])
    if np.any(lengths <= REL_TOL * scale):
        return "coincident consecutive vertices"
    nxt = np.roll(edges, -1, axis=0)
    cross = edges[:, 0] * nxt[:, 1] - edges[:, 1] * nxt[:, 0]
    if np.any(cross < -REL_TOL * scale**2):
        return "not convex or not counterclockwise"
    a = _shoelace(pts)
    if a <= 0:
        return "non-positive signed area (clockwise order?)"
    # a convex CCW turn sequence winding more than once is a star, not a polygon
    turn = np.arctan2(cross, (edges * nxt).sum(1)).sum()
    if turn > 2 * np.pi + 1e-6:
        return "self-intersecting vertex sequence"
    if area_floor is None:
        span = pts.max(0) - pts.min(0)
        area_floor = AREA_FLOOR_FACTOR * float(span[0] * span[1])
    if a < area_floor:
        return "area below floor"
    return None


@dataclass(frozen=True, eq=False)
class ConvexPolygon:
    """Convex polygon with counterclockwise vertices.

    Construction validates orientation, convexity, distinct consecutive
    vertices and the area floor; invalid input raises GeometryError.
    """

    vertices: np.ndarray
    area_floor: Optional[float] = None

    def __post_init__(self):
        pts = _as_points(self.vertices)
        pts.setflags(write=False)
        object.__setattr__(self, "vertices", pts)
        problem = convexity_defect(pts, self.area_floor)
        if problem is not None:
            raise GeometryError(f"invalid convex polygon: {problem}")

    @classmethod
    def regular(cls, k: int, radius: float = 1.0, center=(0.0, 0.0), angle: float = 0.0):
        t = angle + 2 * np.pi * np.arange(k) / k
        c = np.asarray(center, dtype=float)
        return cls(np.column_stack([c[0] + radius * np.cos(t), c[1] + radius * np.sin(t)]))

    @classmethod
    def box(cls, xmin: float, ymin: float, xmax: float, ymax: float):
        return cls([[xmin, ymin], [xmax, ymin], [xmax, ymax], [xmin, ymax]])

    @property
    def k(self) -> int:
        return self.vertices.shape[0]

    @property
    def diameter(self) -> float:
        return diameter(self.vertices)

    def edges(self) -> np.ndarray:
        return np.roll(self.vertices, -1, axis=0) - self.vertices

    def outward_normals(self) -> np.ndarray:
        e = self.edges()
        nrm = np.column_stack([e[:, 1], -e[:, 0]])
        return nrm / np.hypot(e[:, 0], e[:, 1])[:, None]

    def side_lengths(self) -> np.ndarray:
        e = self.edges()
        return np.hypot(e[:, 0], e[:, 1])

    def interior_angles(self) -> np.ndarray:
        """Interior angles in degrees."""
        e = self.edges()
        prev = -np.roll(e, 1, axis=0)
        cosang = (e * prev).sum(1) / (np.hypot(*e.T) * np.hypot(*prev.T))
        return np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0)))

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        nrm = self.outward_normals()
        offs = (nrm * self.vertices).sum(1)
        return np.all(p @ nrm.T <= offs + tol, axis=1)

    def transformed(self, rotation=None, shift=(0.0, 0.0), scale: float = 1.0):
        pts = self.vertices * scale
        if rotation is not None:
            pts = pts @ np.asarray(rotation, dtype=float).T
        return ConvexPolygon(pts + np.asarray(shift, dtype=float))

    def _tol(self) -> float:
        return REL_TOL * self.diameter

    def _floor(self) -> float:
        if self.area_floor is not None:
            return self.area_floor
        span = self.vertices.max(0) - self.vertices.min(0)
        return AREA_FLOOR_FACTOR * float(span[0] * span[1])


@dataclass(frozen=True)
class HalfPlane:
    """The closed half-plane ``{p : <normal, p> <= offset}`` with unit normal."""

    normal: tuple
    offset: float

    def __post_init__(self):
        nrm = np.asarray(self.normal, dtype=float)
        if nrm.shape != (2,) or abs(np.hypot(*nrm) - 1.0) > 1e-12:
            raise GeometryError("half-plane normal must be a unit 2-vector")
        object.__setattr__(self, "normal", (float(nrm[0]), float(nrm[1])))
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def from_vector(cls, direction, offset: float) -> "HalfPlane":
        """Normalise ``<direction, p> <= offset`` to unit form."""
        d = np.asarray(direction, dtype=float)
        s = float(np.hypot(*d))
        if s == 0.0:
            raise GeometryError("zero direction")
        return cls(tuple(d / s), offset / s)


def clip(poly: ConvexPolygon, hp: HalfPlane) -> Optional[ConvexPolygon]:
    """Intersection of ``poly`` with ``hp``; None when it has no area."""
    pts = poly.vertices
    k = pts.shape[0]
    px = np.ascontiguousarray(pts[:, 0])
    py = np.ascontiguousarray(pts[:, 1])
    lab = np.arange(k, dtype=np.int64)
    ox = np.empty(k + 2)
    oy = np.empty(k + 2)
    ol = np.empty(k + 2, dtype=np.int64)
    cnt = _kernels.clip_halfplane(px, py, lab, k, hp.normal[0], hp.normal[1], hp.offset,
                                  -1, poly._tol(), ox, oy, ol)
    if cnt < 3:
        return None
    a, _, _, _ = _kernels.polygon_moments(ox, oy, cnt)
    if a < poly._floor():
        return None
    try:
        return ConvexPolygon(np.column_stack([ox[:cnt], oy[:cnt]]), area_floor=poly.area_floor)
    except GeometryError:
        return None


def area(poly: ConvexPolygon) -> float:
    return _shoelace(poly.vertices)


def centroid(poly: ConvexPolygon) -> np.ndarray:
    pts = poly.vertices
    _, gx, gy, _ = _kernels.polygon_moments(
        np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1]), pts.shape[0])
    return np.array([gx, gy])


def integrate_quadratic(poly: ConvexPolygon, center) -> float:
    """Exact ``int_poly |y - center|^2 dy``.

    Uses the fan from the area centroid and the parallel-axis shift
    ``I_c = I_g + |g - c|^2 A``.
    """
    pts = poly.vertices
    a, gx, gy, polar = _kernels.polygon_moments(
        np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1]), pts.shape[0])
    c = np.asarray(center, dtype=float)
    return float(polar + a * ((gx - c[0]) ** 2 + (gy - c[1]) ** 2))


@dataclass(eq=False)
class PowerDiagram:
    """Power cells of weighted sites restricted to a convex window.

    Cell ``i`` is stored as the slice ``offsets[i]:offsets[i+1]`` of the flat
    vertex arrays. ``labels[t] >= 0`` marks the edge starting at vertex t as a
    piece of window edge ``labels[t]``; ``-1 - j`` marks the bisector with site
    ``j``. Empty cells have zero vertices and zero area.
    """

    sites: np.ndarray
    phi: np.ndarray
    omega: ConvexPolygon
    vx: np.ndarray
    vy: np.ndarray
    labels: np.ndarray
    offsets: np.ndarray
    areas: np.ndarray
    second_moments: np.ndarray  # int_cell |y - x_i|^2 dy
    _cells: Optional[list] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.sites.shape[0]

    def cell_vertices(self, i: int) -> np.ndarray:
        s, e = self.offsets[i], self.offsets[i + 1]
        return np.column_stack([self.vx[s:e], self.vy[s:e]])

    @property
    def cells(self) -> list:
        """List of ``(index, ConvexPolygon or None)`` pairs."""
        if self._cells is None:
            out = []
            for i in range(self.n):
                if self.offsets[i + 1] - self.offsets[i] < 3:
                    out.append((i, None))
                    continue
                try:
                    out.append((i, ConvexPolygon(self.cell_vertices(i), area_floor=0.0)))
                except GeometryError:
                    # slivers at the tolerance scale; their area is negligible
                    out.append((i, None))
            self._cells = out
        return self._cells

    def owner(self, points) -> np.ndarray:
        """Index minimising ``|x_i - y|^2 - phi_i`` for each query point."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        cost = ((p[:, None, :] - self.sites[None, :, :]) ** 2).sum(-1) - self.phi[None, :]
        return np.argmin(cost, axis=1)

    def boundary_pieces(self):
        """Sub-segments of window edges, one per (cell, window edge) contact.

        Returns ``(start, end, cell_index, edge_index)`` arrays.
        """
        lab = self.labels
        on_window = np.nonzero(lab >= 0)[0]
        cell_of = np.searchsorted(self.offsets, on_window, side="right") - 1
        nxt = on_window + 1
        wrap = nxt == self.offsets[cell_of + 1]
        nxt[wrap] = self.offsets[cell_of[wrap]]
        start = np.column_stack([self.vx[on_window], self.vy[on_window]])
        end = np.column_stack([self.vx[nxt], self.vy[nxt]])
        return start, end, cell_of, lab[on_window]


class _OrderCache:
    """Sorted-neighbour table for the most recent site array.

    The key and table are swapped in as one tuple, so concurrent readers
    never see a key paired with another array's table.
    """

    max_sites = 2500

    def __init__(self):
        self._entry = (None, _EMPTY_ORDER)

    def get(self, sites: np.ndarray) -> np.ndarray:
        n = sites.shape[0]
        if n > self.max_sites:
            return _EMPTY_ORDER
        key = (n, sites.tobytes())
        entry = self._entry
        if entry[0] == key:
            return entry[1]
        order = _kernels.neighbor_order(
            np.ascontiguousarray(sites[:, 0]), np.ascontiguousarray(sites[:, 1]))
        self._entry = (key, order)
        return order


_order_cache = _OrderCache()


def power_diagram(sites, phi, omega: ConvexPolygon) -> PowerDiagram:
    """Power diagram of ``sites`` with weights ``phi`` clipped to ``omega``.

    ``sites`` may be an (n, 2) array or anything exposing ``.points``.
    """
    if not isinstance(omega, ConvexPolygon):
        raise GeometryError("omega must be a ConvexPolygon")
    pts = np.asarray(getattr(sites, "points", sites), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise GeometryError("power diagrams need 2D sites")
    w = np.asarray(phi, dtype=float)
    if w.shape != (pts.shape[0],):
        raise GeometryError(f"phi has shape {w.shape}, expected ({pts.shape[0]},)")
    order = _order_cache.get(pts)
    W = omega.vertices
    scale = max(omega.diameter, 1.0)
    vx, vy, vl, offs, areas, quad = _kernels.power_cells(
        np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1]), w,
        np.ascontiguousarray(W[:, 0]), np.ascontiguousarray(W[:, 1]), order,
        REL_TOL * scale, omega._floor())
    return PowerDiagram(pts, w, omega, vx, vy, vl, offs, areas, quad)


# 2-point Gauss-Legendre on [0, 1]; exact for cubics
GAUSS_NODES = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
GAUSS_WEIGHTS = np.array([0.5, 0.5])


def affine_weight(anchor0, anchor1) -> Callable[[np.ndarray], np.ndarray]:
    """Affine map F with F(anchor0) = 0 and F(anchor1) = 1 along anchor1 - anchor0."""
    a0 = np.asarray(anchor0, dtype=float)
    d = np.asarray(anchor1, dtype=float) - a0
    dd = float(d @ d)

    def F(y):
        return (np.asarray(y, dtype=float) - a0) @ d / dd

    return F


def edge_integral_affine_times_g(p0, p1, g: Callable, anchor0, anchor1,
                                 breakpoints: Sequence = ()) -> float:
    """Line integral of ``g * F`` over the segment ``[p0, p1]``.

    ``F`` is affine with ``F(anchor0) = 0`` and ``F(anchor1) = 1``. ``g`` must
    be quadratic between consecutive ``breakpoints`` (points on the segment),
    so every piece is a cubic and 2-point Gauss-Legendre is exact.
    """
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    d = p1 - p0
    L = float(np.hypot(*d))
    if L == 0.0:
        return 0.0
    F = affine_weight(anchor0, anchor1)
    ts = [0.0, 1.0]
    for b in breakpoints:
        t = float((np.asarray(b, dtype=float) - p0) @ d / (L * L))
        if 0.0 < t < 1.0:
            ts.append(t)
    ts = np.unique(ts)
    total = 0.0
    for t0, t1 in zip(ts[:-1], ts[1:]):
        s = t0 + (t1 - t0) * GAUSS_NODES
        y = p0[None, :] + s[:, None] * d[None, :]
        vals = np.asarray(g(y), dtype=float) * F(y)
        total += (t1 - t0) * L * float(vals @ GAUSS_WEIGHTS)
    return total
