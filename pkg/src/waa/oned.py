"""Closed-form archetypal interval in one dimension and quantile W2.

For a law on the line with quantile function ``Q`` put ``C0 = int Q``,
``C1 = int t Q(t) dt`` and ``C2 = int Q^2``. Then

    W2^2(mu, uniform[a, b]) = (a^2 + ab + b^2)/3 - 2((C0 - C1) a + C1 b) + C2,

a strictly convex quadratic minimised at ``a = 4 C0 - 6 C1``,
``b = 6 C1 - 2 C0``. On atoms ``C1`` is integrated exactly, which amounts to
evaluating the CDF at the midpoint of each jump.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np


class DegenerateMeasure(ValueError):
    """Raised when all the mass sits at one point."""


@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise ValueError("interval endpoints must be finite")
        if not self.a < self.b:
            raise ValueError(f"need a < b, got [{self.a}, {self.b}]")

    @property
    def width(self) -> float:
        return self.b - self.a

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.a + self.b)


@dataclass(frozen=True, eq=False)
class Empirical1D:
    """Atoms on the line with a right-continuous CDF."""

    support: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        x = np.array(self.support, dtype=float).ravel()
        w = np.array(self.masses, dtype=float).ravel()
        if x.size == 0 or x.size != w.size:
            raise ValueError("need one mass per support point")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(w))):
            raise ValueError("support and masses must be finite")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-10:
            raise ValueError("masses must be positive and sum to one")
        if np.any(np.diff(x) <= 0):
            raise ValueError("support must be strictly increasing")
        x.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "support", x)
        object.__setattr__(self, "masses", w)

    @classmethod
    def from_samples(cls, values, weights=None) -> "Empirical1D":
        x = np.asarray(values, dtype=float).ravel()
        w = np.ones(x.size) if weights is None else np.asarray(weights, dtype=float).ravel()
        if np.any(w < 0):
            raise ValueError("weights must be non-negative")
        keep = w > 0
        u, inv = np.unique(x[keep], return_inverse=True)
        m = np.bincount(inv, weights=w[keep], minlength=u.size)
        return cls(u, m / m.sum())

    @property
    def cdf(self) -> np.ndarray:
        """F at each support point (right limit)."""
        return np.cumsum(self.masses)

    def moments(self):
        """(C0, C1, C2) with C1 taken against the mid-jump CDF."""
        x, m = self.support, self.masses
        left = np.concatenate([[0.0], np.cumsum(m)[:-1]])
        return float(m @ x), float((x * m) @ (left + 0.5 * m)), float(m @ (x * x))

    def quantile(self, t):
        """Generalised inverse ``inf {x : F(x) >= t}``."""
        idx = np.searchsorted(self.cdf, np.asarray(t, dtype=float), side="left")
        return self.support[np.minimum(idx, self.support.size - 1)]


def solve_1d(mu: Empirical1D) -> Interval:
    if mu.support.size < 2:
        raise DegenerateMeasure("all mass at a single point")
    C0, C1, _ = mu.moments()
    return Interval(4 * C0 - 6 * C1, 6 * C1 - 2 * C0)


def objective_1d(mu: Empirical1D, iv: Interval) -> float:
    C0, C1, C2 = mu.moments()
    a, b = iv.a, iv.b
    return (2 * a * a + 2 * a * b + 2 * b * b) / 6 - 2 * ((C0 - C1) * a + C1 * b) + C2


def _pieces(q: Union[Empirical1D, Interval]):
    """Quantile function as linear pieces: breakpoints t, left and right values."""
    if isinstance(q, Interval):
        return np.array([0.0, 1.0]), np.array([q.a]), np.array([q.b])
    t = np.concatenate([[0.0], q.cdf])
    t[-1] = 1.0
    return t, q.support, q.support


def _eval(t, v0, v1, tb, piece):
    h = t[piece + 1] - t[piece]
    s = np.where(h > 0, (tb - t[piece]) / np.where(h > 0, h, 1.0), 0.0)
    return v0[piece] + s * (v1[piece] - v0[piece])


def w2_1d(mu: Union[Empirical1D, Interval], nu: Union[Empirical1D, Interval]) -> float:
    """Exact W2 between two laws on the line; an Interval means its uniform law."""
    tp, p0, p1 = _pieces(mu)
    tq, q0, q1 = _pieces(nu)
    tb = np.union1d(tp, tq)
    lo, hi = tb[:-1], tb[1:]
    h = hi - lo
    mid = 0.5 * (lo + hi)
    ip = np.clip(np.searchsorted(tp, mid, side="right") - 1, 0, p0.size - 1)
    iq = np.clip(np.searchsorted(tq, mid, side="right") - 1, 0, q0.size - 1)
    d0 = _eval(tp, p0, p1, lo, ip) - _eval(tq, q0, q1, lo, iq)
    d1 = _eval(tp, p0, p1, hi, ip) - _eval(tq, q0, q1, hi, iq)
    val = float((h * (d0 * d0 + d0 * d1 + d1 * d1)).sum() / 3.0)
    return float(np.sqrt(max(val, 0.0)))
