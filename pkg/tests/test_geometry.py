import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from shapely.geometry import Polygon as ShapelyPolygon, box as shapely_box

from waa.geometry import (
    ConvexPolygon,
    GeometryError,
    HalfPlane,
    area,
    centroid,
    clip,
    convexity_defect,
    edge_integral_affine_times_g,
    integrate_quadratic,
    power_diagram,
)

UNIT = ConvexPolygon.box(0, 0, 1, 1)
TRI = ConvexPolygon([(0, 0), (1, 0), (0, 1)])


def random_convex(rng, k=None, scale=1.0):
    """Convex polygon from sorted random angles on a jittered ellipse."""
    k = k or int(rng.integers(3, 9))
    ang = np.sort(rng.uniform(0, 2 * np.pi, k))
    while np.min(np.diff(np.r_[ang, ang[0] + 2 * np.pi])) < 0.2:
        ang = np.sort(rng.uniform(0, 2 * np.pi, k))
    r = scale * rng.uniform(0.8, 1.2)
    pts = np.column_stack([r * np.cos(ang) * rng.uniform(0.6, 1.4), r * np.sin(ang)])
    return ConvexPolygon(pts + rng.normal(size=2))


# -- construction -------------------------------------------------------------

def test_rejects_clockwise():
    with pytest.raises(GeometryError):
        ConvexPolygon([(0, 0), (0, 1), (1, 0)])


def test_rejects_nonconvex_and_duplicates():
    with pytest.raises(GeometryError):
        ConvexPolygon([(0, 0), (2, 0), (1, 0.2), (2, 2), (0, 2)])
    with pytest.raises(GeometryError):
        ConvexPolygon([(0, 0), (1, 0), (1, 0), (0, 1)])
    with pytest.raises(GeometryError):
        ConvexPolygon([(0, 0), (1, 0)])
    with pytest.raises(GeometryError):
        ConvexPolygon([(0, 0), (1, 0), (np.nan, 1)])


def test_convexity_defect_reports_reason():
    assert convexity_defect([(0, 0), (1, 0), (0, 1)]) is None
    assert convexity_defect([(0, 0), (0, 1), (1, 0)]) is not None


def test_halfplane_requires_unit_normal():
    with pytest.raises(ValueError):
        HalfPlane((2.0, 0.0), 1.0)
    hp = HalfPlane.from_vector((2.0, 0.0), 1.0)
    assert np.allclose(hp.normal, (1, 0)) and hp.offset == pytest.approx(0.5)


# -- clip ---------------------------------------------------------------------

def test_clip_examples():
    half = clip(UNIT, HalfPlane((1.0, 0.0), 0.5))
    assert area(half) == pytest.approx(0.5, abs=1e-15)
    assert np.allclose(half.vertices.min(0), (0, 0)) and np.allclose(half.vertices.max(0), (0.5, 1))
    same = clip(UNIT, HalfPlane((1.0, 0.0), 2.0))
    assert np.allclose(same.vertices, UNIT.vertices)
    assert clip(UNIT, HalfPlane((1.0, 0.0), -1.0)) is None


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 100_000), st.floats(0, 2 * np.pi), st.floats(-1.5, 1.5))
def test_clip_monotonicity(seed, theta, off):
    poly = random_convex(np.random.default_rng(seed))
    hp = HalfPlane((np.cos(theta), np.sin(theta)), off + float(np.dot((np.cos(theta), np.sin(theta)),
                                                                      centroid(poly))))
    out = clip(poly, hp)
    if out is not None:
        assert area(out) <= area(poly) * (1 + 1e-12)
        assert np.all(poly.contains(out.vertices, tol=1e-9))
        again = clip(out, hp)
        assert again is not None and area(again) == pytest.approx(area(out), rel=1e-12)


def test_clip_matches_shapely():
    rng = np.random.default_rng(3)
    for _ in range(200):
        P = random_convex(rng)
        th = rng.uniform(0, 2 * np.pi)
        n = np.array([np.cos(th), np.sin(th)])
        off = float(n @ centroid(P) + rng.normal(scale=0.6))
        got = clip(P, HalfPlane(n, off))
        # half-plane as a big polygon
        t = np.array([-n[1], n[0]])
        base = off * n
        big = ShapelyPolygon([base + 100 * t, base - 100 * t, base - 100 * t - 100 * n,
                              base + 100 * t - 100 * n])
        ref = ShapelyPolygon(P.vertices).intersection(big).area
        if got is None:
            assert ref < 1e-9
        else:
            assert area(got) == pytest.approx(ref, rel=1e-9, abs=1e-12)
            assert area(got) <= area(P) * (1 + 1e-12)


# -- area / centroid / moments --------------------------------------------------

def test_area_examples():
    assert area(UNIT) == 1.0
    assert area(TRI) == 0.5
    assert area(ConvexPolygon.regular(6, 1.0)) == pytest.approx(6 * 0.5 * np.sin(np.pi / 3), rel=1e-14)


def test_centroid_examples():
    assert np.allclose(centroid(UNIT), (0.5, 0.5))
    assert np.allclose(centroid(TRI), (1 / 3, 1 / 3))
    t = np.array([3.0, -7.5])
    assert np.allclose(centroid(TRI.transformed(shift=t)), centroid(TRI) + t, atol=1e-14)


def test_integrate_quadratic_examples():
    assert integrate_quadratic(UNIT, (0.5, 0.5)) == pytest.approx(1 / 6, rel=1e-14)
    assert integrate_quadratic(TRI, (0, 0)) == pytest.approx(1 / 6, rel=1e-14)


def test_integrate_quadratic_parallel_axis():
    rng = np.random.default_rng(5)
    for _ in range(20):
        P = random_convex(rng)
        c0 = centroid(P)
        c = rng.normal(scale=10, size=2)
        # int (y - c0) over P is zero
        expect = integrate_quadratic(P, c0) + area(P) * np.sum((c - c0) ** 2)
        assert integrate_quadratic(P, c) == pytest.approx(expect, rel=1e-12)


def test_integrate_quadratic_against_midpoint_rule():
    P = ConvexPolygon([(0, 0), (2, 0.3), (1.5, 1.7), (-0.2, 1.0)])
    h = 1e-3
    xs = np.arange(-0.2, 2.0, h) + h / 2
    ys = np.arange(0.0, 1.7, h) + h / 2
    X, Y = np.meshgrid(xs, ys)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    inside = P.contains(pts)
    ref = ((pts[inside] - (0.3, 0.4)) ** 2).sum(1).sum() * h * h
    assert integrate_quadratic(P, (0.3, 0.4)) == pytest.approx(ref, rel=2e-3)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 10.0), st.integers(0, 10_000))
def test_scaling_laws(s, seed):
    P = random_convex(np.random.default_rng(seed))
    c = centroid(P)
    Q = P.transformed(scale=s)
    assert area(Q) == pytest.approx(s**2 * area(P), rel=1e-10)
    assert integrate_quadratic(Q, s * c) == pytest.approx(s**4 * integrate_quadratic(P, c), rel=1e-10)


# -- power diagrams -------------------------------------------------------------

def test_power_diagram_two_sites_voronoi():
    om = ConvexPolygon.box(-2, -2, 2, 2)
    pd = power_diagram(np.array([(-1.0, 0.0), (1.0, 0.0)]), np.zeros(2), om)
    assert np.allclose(pd.areas, (8, 8))
    assert np.allclose(pd.cell_vertices(0)[:, 0].max(), 0.0)


def test_power_diagram_single_site():
    om = ConvexPolygon.regular(5, 2.0)
    pd = power_diagram(np.array([(7.0, 1.0)]), np.array([-3.0]), om)
    assert pd.areas[0] == pytest.approx(area(om), rel=1e-14)


@pytest.mark.parametrize("t", [-0.7, 0.0, 0.4, 1.3])
def test_power_diagram_shifted_bisector_grid_oracle(t):
    """Bisector of (-1,0),(1,0) with phi = (4t, 0) checked by grid membership."""
    om = ConvexPolygon.box(-2, -2, 2, 2)
    sites = np.array([(-1.0, 0.0), (1.0, 0.0)])
    phi = np.array([4 * t, 0.0])
    pd = power_diagram(sites, phi, om)
    g = (np.arange(200) + 0.5) / 200 * 4 - 2
    X, Y = np.meshgrid(g, g)
    y = np.column_stack([X.ravel(), Y.ravel()])
    cost = ((y[:, None] - sites[None]) ** 2).sum(-1) - phi
    frac0 = np.mean(cost.argmin(1) == 0)
    assert pd.areas[0] / 16 == pytest.approx(frac0, abs=1 / 200)
    assert pd.areas[0] == pytest.approx(4 * (2 + t), rel=1e-12)


def random_instance(rng, n):
    om = random_convex(rng)
    lo, hi = om.vertices.min(0), om.vertices.max(0)
    sites = rng.uniform(lo - 0.3, hi + 0.3, size=(n, 2))
    phi = rng.normal(scale=0.2, size=n)
    return om, sites, phi


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 100_000), st.integers(1, 60))
def test_partition_of_unity(seed, n):
    om, sites, phi = random_instance(np.random.default_rng(seed), n)
    pd = power_diagram(sites, phi, om)
    assert pd.areas.sum() == pytest.approx(area(om), rel=1e-8)
    total = integrate_quadratic(om, (0.0, 0.0))
    # integrate |y|^2 cell by cell via the parallel-axis shift of each cell moment
    parts = 0.0
    for i, cell in pd.cells:
        if cell is not None:
            parts += integrate_quadratic(cell, (0.0, 0.0))
            assert np.all(om.contains(cell.vertices, tol=1e-9))
    assert parts == pytest.approx(total, rel=1e-8)


def test_cells_match_shapely_areas():
    rng = np.random.default_rng(11)
    om, sites, phi = random_instance(rng, 25)
    pd = power_diagram(sites, phi, om)
    shp = ShapelyPolygon(om.vertices)
    for i, cell in pd.cells:
        region = shp
        for j in range(len(sites)):
            if j == i:
                continue
            d = sites[j] - sites[i]
            off = 0.5 * (sites[j] @ sites[j] - sites[i] @ sites[i] - phi[j] + phi[i])
            nrm = d / np.linalg.norm(d)
            off /= np.linalg.norm(d)
            t = np.array([-nrm[1], nrm[0]])
            base = off * nrm
            region = region.intersection(ShapelyPolygon(
                [base + 50 * t, base - 50 * t, base - 50 * t - 50 * nrm, base + 50 * t - 50 * nrm]))
        assert pd.areas[i] == pytest.approx(region.area, abs=1e-10)


def test_membership_brute_force():
    rng = np.random.default_rng(2)
    om, sites, phi = random_instance(rng, 40)
    pd = power_diagram(sites, phi, om)
    lo, hi = om.vertices.min(0), om.vertices.max(0)
    y = rng.uniform(lo, hi, size=(4000, 2))
    y = y[om.contains(y)][:1000]
    cost = ((y[:, None] - sites[None]) ** 2).sum(-1) - phi
    best = cost.min(1)
    owner = pd.owner(y)
    assert np.all(cost[np.arange(len(y)), owner] <= best + 1e-9)


def test_coincident_sites_resolved():
    om = ConvexPolygon.box(0, 0, 1, 1)
    sites = np.array([(0.5, 0.5), (0.5, 0.5), (0.2, 0.2)])
    pd = power_diagram(sites, np.array([0.0, 0.1, 0.0]), om)
    assert pd.areas[0] == 0.0 and pd.areas[1] > 0
    assert pd.areas.sum() == pytest.approx(1.0, rel=1e-12)


def test_boundary_pieces_cover_perimeter():
    rng = np.random.default_rng(4)
    om, sites, phi = random_instance(rng, 30)
    start, end, cell, edge = power_diagram(sites, phi, om).boundary_pieces()
    lengths = np.hypot(*(end - start).T)
    per_edge = np.bincount(edge, weights=lengths, minlength=om.k)
    assert np.allclose(per_edge, om.side_lengths(), rtol=1e-10)


# -- edge integrals -------------------------------------------------------------

def test_edge_integral_examples():
    p0, p1 = np.array([0.0, 0.0]), np.array([3.0, 4.0])
    one = lambda y: np.ones(len(y))
    assert edge_integral_affine_times_g(p0, p1, one, p0, p1) == pytest.approx(2.5)
    c = lambda y: np.full(len(y), 1.7)
    assert edge_integral_affine_times_g(p0, p1, c, p0, p1) == pytest.approx(1.7 * 2.5)
    sq = lambda y: (np.atleast_2d(y) ** 2).sum(-1)
    val = edge_integral_affine_times_g(np.array([0.0, 0.0]), np.array([1.0, 0.0]), sq,
                                       np.array([0.0, 0.0]), np.array([1.0, 0.0]))
    t = (np.arange(1000) + 0.5) / 1000
    assert val == pytest.approx(np.mean(t**3), abs=1e-6)
    assert val == pytest.approx(0.25, abs=1e-14)
