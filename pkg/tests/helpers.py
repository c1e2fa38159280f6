"""Random instance generators shared by the tests."""

import numpy as np
from scipy.spatial import cKDTree

from waa.geometry import ConvexPolygon, convexity_defect
from waa.ot import DiscreteMeasure


def random_quad(rng, scale: float = 1.0) -> ConvexPolygon:
    """Random convex quadrilateral with reasonably spread vertices."""
    while True:
        ang = np.sort(rng.uniform(0, 2 * np.pi, 4))
        gaps = np.diff(np.r_[ang, ang[0] + 2 * np.pi])
        if gaps.min() < 0.6:
            continue
        r = scale * rng.uniform(0.7, 1.3, 4)
        pts = np.column_stack([r * np.cos(ang), r * np.sin(ang)]) + rng.normal(scale=0.3, size=2)
        if convexity_defect(pts) is None:
            return ConvexPolygon(pts)


def separated_atoms(rng, omega: ConvexPolygon, n: int, min_sep: float = None) -> DiscreteMeasure:
    """n atoms inside ``omega`` with a minimum pairwise separation.

    Atoms closer than the separation make the fixed-step ascent stiff, so the
    generators keep them apart.
    """
    lo, hi = omega.vertices.min(0), omega.vertices.max(0)
    if min_sep is None:
        min_sep = 0.35 * np.sqrt((hi - lo).prod() / n)
    pts = []
    while len(pts) < n:
        p = rng.uniform(lo, hi)
        if not omega.contains(p[None], tol=-0.02 * omega.diameter)[0]:
            continue
        if pts and cKDTree(pts).query(p)[0] < min_sep:
            continue
        pts.append(p)
    w = rng.uniform(0.5, 1.5, n)
    return DiscreteMeasure(np.array(pts), w / w.sum())
