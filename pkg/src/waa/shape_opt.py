"""Polygon fitting by alternating dual ascent and vertex gradient descent.

The outer loop minimises ``W2^2(mu, 1_Omega/|Omega|) + eps * U_m(Omega)`` over
convex k-gons. For a fixed dual potential the transport term equals
``sum_i phi_i m_i + (1/|Omega|) int_Omega f_phi``, where
``f_phi(y) = min_i |y - x_i|^2 - phi_i`` does not depend on Omega, so its
vertex gradient is a pair of boundary integrals over the two edges adjacent
to each vertex.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Callable, Optional, Union

import numpy as np

from .geometry import (
    GAUSS_NODES,
    GAUSS_WEIGHTS,
    ConvexPolygon,
    PowerDiagram,
    area,
    convexity_defect,
    edge_integral_affine_times_g,
    power_diagram,
)
from .ot import DiscreteMeasure, dual_ascent

log = logging.getLogger(__name__)

MAX_HALVINGS = 30


class DegeneratePolygon(RuntimeError):
    """Raised when a descent step cannot be shrunk back into a convex polygon."""


@dataclass
class SolverConfig:
    k: int = 3
    epsilon: float = 0.0
    m_exponent: float = 2.0
    tau1: float = 0.5
    tau2: float = 0.1
    delta1: float = 1e-3
    delta2: float = 1e-5
    max_outer: int = 1000
    max_inner: int = 200
    area_floor: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.k < 3:
            raise ValueError("k must be at least 3")
        if self.tau1 <= 0 or self.tau2 <= 0:
            raise ValueError("step sizes must be positive")
        if self.delta1 <= 0 or self.delta2 <= 0:
            raise ValueError("tolerances must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.m_exponent < 1:
            raise ValueError("the Renyi exponent must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class OuterRecord:
    vertices: np.ndarray
    objective: float
    w2: float
    entropy: float
    inner_iterations: int
    halvings: int
    step: float
    inner_converged: bool = True


@dataclass
class SolveTrace:
    records: list
    polygon: ConvexPolygon
    phi: np.ndarray
    converged: bool

    @property
    def objective(self) -> float:
        return self.records[-1].objective

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "final_vertices": self.polygon.vertices.tolist(),
            "iterations": [
                {
                    "vertices": r.vertices.tolist(),
                    "objective": r.objective,
                    "w2": r.w2,
                    "entropy": r.entropy,
                    "inner_iterations": r.inner_iterations,
                    "halvings": r.halvings,
                    "step": r.step,
                    "inner_converged": r.inner_converged,
                }
                for r in self.records
            ],
        }


@dataclass
class FPhiField:
    """``f_phi(y) = sum_i 1_{cell_i}(y) (|y - x_i|^2 - phi_i)`` on a window."""

    diagram: PowerDiagram

    @classmethod
    def build(cls, sites, phi, omega: ConvexPolygon) -> "FPhiField":
        return cls(power_diagram(sites, phi, omega))

    def __call__(self, y) -> np.ndarray:
        pd = self.diagram
        p = np.atleast_2d(np.asarray(y, dtype=float))
        cost = ((p[:, None, :] - pd.sites[None, :, :]) ** 2).sum(-1) - pd.phi[None, :]
        return cost.min(axis=1)

    def integral(self) -> float:
        pd = self.diagram
        return float(pd.second_moments.sum() - pd.phi @ pd.areas)


def renyi_energy(omega: Union[ConvexPolygon, float], epsilon: float, m: float) -> float:
    """``eps / ((m-1) |Omega|^(m-1))``, or ``-eps log |Omega|`` when m = 1."""
    if epsilon < 0 or m < 1:
        raise ValueError("need epsilon >= 0 and m >= 1")
    a = area(omega) if isinstance(omega, ConvexPolygon) else float(omega)
    if epsilon == 0:
        return 0.0
    if m == 1:
        return -epsilon * float(np.log(a))
    return epsilon / ((m - 1.0) * a ** (m - 1.0))


def _edge_moments_constant(omega: ConvexPolygon):
    half = 0.5 * omega.side_lengths()
    return half, half.copy()


def _edge_moments_field(omega: ConvexPolygon, fld: FPhiField):
    """Per edge e: ``int_e f (1 - s)`` and ``int_e f s``, s the edge parameter."""
    pd = fld.diagram
    start, end, cell, edge = pd.boundary_pieces()
    k = omega.k
    a0 = omega.vertices[edge]
    d = np.roll(omega.vertices, -1, axis=0)[edge] - a0
    dd = (d * d).sum(1)
    seg = end - start
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    I0 = np.zeros(k)
    I1 = np.zeros(k)
    for node, weight in zip(GAUSS_NODES, GAUSS_WEIGHTS):
        y = start + node * seg
        g = ((y - pd.sites[cell]) ** 2).sum(1) - pd.phi[cell]
        s = ((y - a0) * d).sum(1) / dd
        w = weight * seg_len * g
        I0 += np.bincount(edge, weights=w * (1.0 - s), minlength=k)
        I1 += np.bincount(edge, weights=w * s, minlength=k)
    return I0, I1


def _edge_moments_callable(omega: ConvexPolygon, g: Callable):
    V = omega.vertices
    W = np.roll(V, -1, axis=0)
    I0 = np.array([edge_integral_affine_times_g(p, q, g, q, p) for p, q in zip(V, W)])
    I1 = np.array([edge_integral_affine_times_g(p, q, g, p, q) for p, q in zip(V, W)])
    return I0, I1


def region_integral_vertex_gradients(omega: ConvexPolygon, g=None) -> np.ndarray:
    """Gradient of ``int_Omega g`` with respect to every vertex, shape (k, 2).

    For vertex l the result is ``L_l n_{l-1} + R_l n_l`` where ``L_l`` and
    ``R_l`` integrate g against the hat function of vertex l along its two
    edges. ``g`` is None for the constant 1, an :class:`FPhiField`, or a
    callable that is quadratic along each edge.
    """
    if g is None:
        I0, I1 = _edge_moments_constant(omega)
    elif isinstance(g, FPhiField):
        I0, I1 = _edge_moments_field(omega, g)
    else:
        I0, I1 = _edge_moments_callable(omega, g)
    nrm = omega.outward_normals()
    L = np.roll(I1, 1)
    n_prev = np.roll(nrm, 1, axis=0)
    return L[:, None] * n_prev + I0[:, None] * nrm


def vertex_gradient_of_region_integral(omega: ConvexPolygon, g, ell: int) -> np.ndarray:
    return region_integral_vertex_gradients(omega, g)[ell]


def objective_vertex_gradient(mu: DiscreteMeasure, omega: ConvexPolygon, phi_star,
                              cfg: SolverConfig, diagram: Optional[PowerDiagram] = None):
    """Vertex gradient of ``(1/|Omega|) int_Omega f_phi + eps U_m(Omega)`` at fixed phi."""
    fld = FPhiField(diagram if diagram is not None else power_diagram(mu.points, phi_star, omega))
    A = area(omega)
    J = fld.integral()
    gJ = region_integral_vertex_gradients(omega, fld)
    gA = region_integral_vertex_gradients(omega, None)
    grad = gJ / A - (J / A**2) * gA
    if cfg.epsilon > 0:
        grad -= cfg.epsilon * A ** (-cfg.m_exponent) * gA
    return grad


def initialize_polygon(mu: DiscreteMeasure, k: int, seed: int = 0) -> ConvexPolygon:
    """Regular k-gon at the mean of mu with circumradius twice the largest std.

    The first vertex sits at a seeded random angle in ``[0, 2 pi / k)``.
    """
    if k < 3:
        raise ValueError("k must be at least 3")
    lam = float(np.linalg.eigvalsh(mu.covariance()).max())
    radius = 2.0 * np.sqrt(lam) if lam > 1e-300 else 1.0
    angle = np.random.default_rng(seed).uniform(0.0, 2 * np.pi / k)
    return ConvexPolygon.regular(k, radius, center=mu.mean(), angle=angle)


def solve(mu: DiscreteMeasure, omega0: ConvexPolygon, cfg: SolverConfig,
          phi0=None, callback: Optional[Callable[[OuterRecord], None]] = None) -> SolveTrace:
    """Alternate dual ascent on phi with one descent step on the vertices.

    The potential is warm-started across outer iterations. A descent step
    that would leave the set of convex polygons is halved (at most 30 times).
    Stops when the largest vertex displacement falls below ``cfg.delta2``.
    """
    if mu.dim != 2:
        raise ValueError("solve needs a 2D measure")
    if omega0.k != cfg.k:
        raise ValueError(f"initial polygon has {omega0.k} vertices, config says k={cfg.k}")
    omega = omega0
    phi = np.zeros(mu.n) if phi0 is None else np.asarray(phi0, dtype=float)
    records = []
    converged = False
    for _ in range(cfg.max_outer):
        rep = dual_ascent(mu, omega, phi, cfg.tau1, cfg.delta1, cfg.max_inner)
        phi = rep.phi_star
        ent = renyi_energy(omega, cfg.epsilon, cfg.m_exponent)
        grad = objective_vertex_gradient(mu, omega, phi, cfg, rep.diagram)

        step = cfg.tau2
        old = omega.vertices
        for halvings in range(MAX_HALVINGS + 1):
            new = old - step * grad
            if convexity_defect(new, cfg.area_floor) is None:
                break
            step *= 0.5
        else:
            raise DegeneratePolygon(
                f"descent step left the convex polygons after {MAX_HALVINGS} halvings")

        rec = OuterRecord(old.copy(), rep.w2_squared + ent, float(np.sqrt(rep.w2_squared)),
                          ent, rep.iterations, halvings, step, rep.converged)
        records.append(rec)
        if callback is not None:
            callback(rec)
        moved = float(np.abs(new - old).max())
        omega = ConvexPolygon(new, area_floor=cfg.area_floor)
        if moved < cfg.delta2:
            converged = True
            break
    else:
        log.info("solve stopped at max_outer=%d without meeting delta2", cfg.max_outer)
    return SolveTrace(records, omega, phi, converged)
