import numpy as np
import pytest
from scipy.optimize import linprog

from waa.geometry import ConvexPolygon, area, centroid, integrate_quadratic
from waa.oned import Empirical1D, Interval, w2_1d
from waa.ot import (
    DiscreteMeasure,
    SizeError,
    discrete_ot_oracle,
    dual_ascent,
    dual_gradient,
    dual_objective,
    quantize_polygon,
    quantize_triangle,
    w2_semidiscrete,
)

from helpers import random_quad, separated_atoms

UNIT = ConvexPolygon.box(0, 0, 1, 1)


# -- DiscreteMeasure --------------------------------------------------------------

def test_measure_validation():
    with pytest.raises(ValueError):
        DiscreteMeasure([(0, 0), (1, 1)], [0.5, 0.4])
    with pytest.raises(ValueError):
        DiscreteMeasure([(0, 0), (1, 1)], [1.0, 0.0])
    with pytest.raises(ValueError):
        DiscreteMeasure([(0, 0), (0, 0)], [0.5, 0.5])
    with pytest.raises(ValueError):
        DiscreteMeasure([(0, 0, 0)], [1.0])


def test_from_weights_merges_and_drops():
    mu = DiscreteMeasure.from_weights([(0, 0), (1, 0), (0, 0), (5, 5)], [1, 2, 1, 0])
    assert mu.n == 2
    assert np.allclose(mu.masses, [0.5, 0.5])
    assert mu.dim == 2 and np.allclose(mu.mean(), (0.5, 0))


# -- dual functional ---------------------------------------------------------------

def test_dual_objective_examples():
    om = ConvexPolygon.regular(5, 1.3, center=(0.2, -0.1))
    mu = DiscreteMeasure([centroid(om)], [1.0])
    expect = integrate_quadratic(om, centroid(om)) / area(om)
    assert dual_objective(mu, om, [0.0]) == pytest.approx(expect, rel=1e-14)
    mu = DiscreteMeasure([(0.5, 0.5)], [1.0])
    assert dual_objective(mu, UNIT, [0.0]) == pytest.approx(1 / 6, rel=1e-14)


def test_dual_shift_invariance():
    rng = np.random.default_rng(0)
    om = random_quad(rng)
    mu = separated_atoms(rng, om, 12)
    phi = rng.normal(scale=0.1, size=12)
    a = dual_objective(mu, om, phi)
    assert dual_objective(mu, om, phi + 3.7) == pytest.approx(a, abs=1e-10)


def test_dual_gradient_examples():
    mu = DiscreteMeasure([(0.3, 0.3)], [1.0])
    assert np.allclose(dual_gradient(mu, UNIT, [0.0]), 0.0)
    mu = DiscreteMeasure([(0.25, 0.5), (0.75, 0.5)], [0.5, 0.5])
    assert np.allclose(dual_gradient(mu, UNIT, [0.0, 0.0]), 0.0, atol=1e-15)
    mu = DiscreteMeasure([(0.25, 0.5), (0.75, 0.5)], [0.9, 0.1])
    assert np.allclose(dual_gradient(mu, UNIT, [0.0, 0.0]), [0.4, -0.4], atol=1e-15)


def test_dual_gradient_finite_differences():
    rng = np.random.default_rng(1)
    for _ in range(5):
        om = random_quad(rng)
        mu = separated_atoms(rng, om, 10)
        phi = rng.normal(scale=0.05, size=mu.n)
        g = dual_gradient(mu, om, phi)
        assert abs(g.sum()) < 1e-10
        h = 1e-6
        for i in range(mu.n):
            e = np.zeros(mu.n)
            e[i] = h
            fd = (dual_objective(mu, om, phi + e) - dual_objective(mu, om, phi - e)) / (2 * h)
            assert fd == pytest.approx(g[i], rel=1e-5, abs=1e-9)


def test_dual_concave_along_neutral_directions():
    rng = np.random.default_rng(2)
    om = random_quad(rng)
    mu = separated_atoms(rng, om, 15)
    phi = rng.normal(scale=0.05, size=mu.n)
    for _ in range(10):
        d = rng.normal(size=mu.n)
        d -= d.mean()
        d /= np.linalg.norm(d)
        ts = np.linspace(-0.3, 0.3, 31)
        vals = np.array([dual_objective(mu, om, phi + t * d) for t in ts])
        second = vals[:-2] - 2 * vals[1:-1] + vals[2:]
        assert second.max() <= 1e-8


# -- dual ascent ---------------------------------------------------------------------

def test_ascent_single_atom():
    mu = DiscreteMeasure([(0.2, 0.9)], [1.0])
    rep = dual_ascent(mu, UNIT, [0.7])
    assert rep.iterations == 1 and rep.converged
    assert rep.phi_star[0] == 0.7


def test_ascent_symmetric_square():
    om = ConvexPolygon.box(-2, -2, 2, 2)
    mu = DiscreteMeasure([(-1, -1), (1, -1), (1, 1), (-1, 1)], np.full(4, 0.25))
    rep = dual_ascent(mu, om)
    assert np.ptp(rep.phi_star) < 1e-12
    assert np.allclose(rep.diagram.areas, 4.0)
    assert rep.final_residual <= 1e-3 / 0.5


def test_ascent_reports_nonconvergence():
    om = ConvexPolygon.box(0, 0, 1, 1)
    mu = DiscreteMeasure([(0.1, 0.1), (0.9, 0.9)], [0.99, 0.01])
    rep = dual_ascent(mu, om, max_iter=2)
    assert not rep.converged and rep.iterations == 2


def test_ascent_matches_oracle_n16():
    rng = np.random.default_rng(16)
    om = random_quad(rng)
    mu = separated_atoms(rng, om, 16)
    rep = dual_ascent(mu, om)
    assert rep.converged and rep.final_residual <= 2e-3
    exact = discrete_ot_oracle(mu, quantize_polygon(om, 128))
    assert abs(rep.w2_squared - exact) <= 1e-3


def test_w2_self_distance_and_translation():
    om = random_quad(np.random.default_rng(7))
    fine = quantize_polygon(om, 12)
    w = w2_semidiscrete(fine, om)
    spacing = float((om.vertices.max(0) - om.vertices.min(0)).max() / 12)
    assert w <= spacing
    t = np.array([5.0, -3.0])
    shifted = w2_semidiscrete(fine.transformed(shift=t), om.transformed(shift=t))
    assert shifted == pytest.approx(w, abs=1e-8)


def test_w2_triangle_self_quantized():
    T = ConvexPolygon([(-1, -1 / 3), (1, -1 / 3), (0, 2 / 3)])
    mu = quantize_triangle(T.vertices, 5)
    assert w2_semidiscrete(mu, T) <= 0.02


def test_one_dimensional_reduction():
    """Atoms on a line in a thin rectangle: 1D quantile W2 plus the transverse moment.

    The dual Hessian scales like h / (spacing * |Omega|), so this thin window
    needs a smaller ascent step than the default.
    """
    rng = np.random.default_rng(9)
    x = np.arange(9) * 0.33 + rng.uniform(0, 0.1, 9)
    w = rng.uniform(0.5, 1.5, 9)
    w /= w.sum()
    h = 0.05
    om = ConvexPolygon.box(-0.2, -h / 2, 3.4, h / 2)
    mu = DiscreteMeasure(np.column_stack([x, np.zeros(9)]), w)
    rep = dual_ascent(mu, om, tau1=0.02, delta1=1e-10, max_iter=200_000)
    assert rep.converged
    ref = w2_1d(Empirical1D(x, w), Interval(-0.2, 3.4)) ** 2 + h * h / 12
    assert rep.w2_squared == pytest.approx(ref, abs=1e-4)


# -- exact discrete oracle ---------------------------------------------------------

def test_oracle_examples():
    rng = np.random.default_rng(0)
    mu = DiscreteMeasure(rng.normal(size=(7, 2)), np.full(7, 1 / 7))
    assert discrete_ot_oracle(mu, mu) == pytest.approx(0.0, abs=1e-14)
    a, b = DiscreteMeasure([(0, 0)], [1.0]), DiscreteMeasure([(3, 4)], [1.0])
    assert discrete_ot_oracle(a, b) == pytest.approx(25.0)
    line = DiscreteMeasure([(0, 0), (1, 0)], [0.5, 0.5])
    assert discrete_ot_oracle(line, line) == pytest.approx(0.0, abs=1e-14)


def test_network_simplex_matches_linear_program():
    rng = np.random.default_rng(5)
    for _ in range(15):
        n, m = rng.integers(1, 8, size=2)
        mu = DiscreteMeasure.from_weights(rng.normal(size=(n, 2)), rng.uniform(0.1, 1, n))
        nu = DiscreteMeasure.from_weights(rng.normal(size=(m, 2)), rng.uniform(0.1, 1, m))
        C = ((mu.points[:, None] - nu.points[None]) ** 2).sum(-1)
        A = np.vstack([np.kron(np.eye(mu.n), np.ones(nu.n)), np.kron(np.ones(mu.n), np.eye(nu.n))])
        lp = linprog(C.ravel(), A_eq=A, b_eq=np.r_[mu.masses, nu.masses], method="highs")
        assert discrete_ot_oracle(mu, nu) == pytest.approx(lp.fun, abs=1e-10)


def test_network_simplex_degenerate_masses():
    # equal masses on unequal sizes create many degenerate pivots
    mu = DiscreteMeasure.from_weights(np.column_stack([np.arange(6.0), np.zeros(6)]))
    nu = DiscreteMeasure.from_weights(np.column_stack([np.arange(3.0) * 2 + 0.5, np.ones(3)]))
    C = ((mu.points[:, None] - nu.points[None]) ** 2).sum(-1)
    A = np.vstack([np.kron(np.eye(6), np.ones(3)), np.kron(np.ones(6), np.eye(3))])
    lp = linprog(C.ravel(), A_eq=A, b_eq=np.r_[mu.masses, nu.masses], method="highs")
    assert discrete_ot_oracle(mu, nu) == pytest.approx(lp.fun, abs=1e-12)


def test_oracle_size_limit():
    big = DiscreteMeasure.from_weights(np.random.default_rng(0).normal(size=(1200, 2)),
                                       np.arange(1, 1201))
    with pytest.raises(SizeError):
        discrete_ot_oracle(big, big)


# -- quantisation ----------------------------------------------------------------------

@pytest.mark.parametrize("res", [8, 33, 128])
def test_quantize_polygon_moments(res):
    om = random_quad(np.random.default_rng(res))
    q = quantize_polygon(om, res)
    assert q.masses.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(q.mean(), centroid(om), atol=1e-12)
    assert np.all(om.contains(q.points, tol=1e-12))


def test_quantize_triangle_mean_and_mass():
    tri = np.array([(0.0, 0.0), (2.0, 0.0), (0.5, 1.5)])
    q = quantize_triangle(tri, 3)
    assert q.n == 64 and np.allclose(q.masses, 1 / 64)
    assert np.allclose(q.mean(), tri.mean(0), atol=1e-14)
