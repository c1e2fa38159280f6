"""Minimal deterministic SVG figures (no timestamps, fixed number formatting)."""

from __future__ import annotations

from typing import Iterable, Optional
from xml.sax.saxutils import escape

import numpy as np


def _f(v: float) -> str:
    return f"{v:.3f}"


class Figure:
    """World-coordinate canvas with y pointing up."""

    def __init__(self, lo, hi, size: int = 600, margin: float = 0.05):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        span = max(float((hi - lo).max()), 1e-12)
        pad = margin * span
        self.lo = lo - pad
        self.scale = size / (span + 2 * pad)
        self.w = (hi[0] - lo[0] + 2 * pad) * self.scale
        self.h = (hi[1] - lo[1] + 2 * pad) * self.scale
        self.items: list[str] = []

    @classmethod
    def fit(cls, *point_sets, size: int = 600) -> "Figure":
        pts = np.vstack([np.asarray(p, dtype=float).reshape(-1, 2) for p in point_sets if len(p)])
        return cls(pts.min(0), pts.max(0), size=size)

    def _xy(self, p):
        return (p[0] - self.lo[0]) * self.scale, self.h - (p[1] - self.lo[1]) * self.scale

    def circle(self, p, r_px: float, fill: str = "#4477aa", opacity: float = 0.7):
        x, y = self._xy(p)
        self.items.append(f'<circle cx="{_f(x)}" cy="{_f(y)}" r="{_f(r_px)}" '
                          f'fill="{fill}" fill-opacity="{opacity}"/>')

    def square(self, p, half_px: float, fill: str = "#228833"):
        x, y = self._xy(p)
        self.items.append(f'<rect x="{_f(x - half_px)}" y="{_f(y - half_px)}" '
                          f'width="{_f(2 * half_px)}" height="{_f(2 * half_px)}" fill="{fill}"/>')

    def polyline(self, pts, stroke: str = "#000000", width: float = 1.0, closed: bool = False,
                 fill: str = "none", dash: Optional[str] = None):
        coords = " ".join(f"{_f(x)},{_f(y)}" for x, y in (self._xy(p) for p in pts))
        tag = "polygon" if closed else "polyline"
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.items.append(f'<{tag} points="{coords}" fill="{fill}" stroke="{stroke}" '
                          f'stroke-width="{width}"{extra}/>')

    def text(self, p, s: str, size: int = 12):
        x, y = self._xy(p)
        self.items.append(f'<text x="{_f(x)}" y="{_f(y)}" font-size="{size}">{escape(s)}</text>')

    def atoms(self, points, masses, max_px: float = 6.0):
        m = np.asarray(masses, dtype=float)
        r = max_px * np.sqrt(m / m.max())
        for p, rr in zip(points, r):
            self.circle(p, max(rr, 0.5))

    def render(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(self.w)}" '
                f'height="{_f(self.h)}" viewBox="0 0 {_f(self.w)} {_f(self.h)}">')
        body = "\n".join(self.items)
        return f'{head}\n<rect width="100%" height="100%" fill="#ffffff"/>\n{body}\n</svg>\n'

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.render())


def heatmap(values: np.ndarray, xs: Iterable[float], ys: Iterable[float], cell_px: int = 24) -> str:
    """Grid of coloured cells, row i = ys[i], column j = xs[j]; NaN drawn grey."""
    V = np.asarray(values, dtype=float)
    finite = V[np.isfinite(V)]
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    span = hi - lo if hi > lo else 1.0
    ny, nx = V.shape
    w, h = nx * cell_px, ny * cell_px
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
           f'viewBox="0 0 {w} {h}">']
    for i in range(ny):
        for j in range(nx):
            v = V[i, j]
            if np.isfinite(v):
                t = (v - lo) / span
                colour = f"#{int(255 * t):02x}{int(255 * (1 - abs(2 * t - 1))):02x}{int(255 * (1 - t)):02x}"
            else:
                colour = "#bbbbbb"
            # row 0 at the bottom so the vertical axis increases upward
            out.append(f'<rect x="{j * cell_px}" y="{(ny - 1 - i) * cell_px}" width="{cell_px}" '
                       f'height="{cell_px}" fill="{colour}"/>')
    out.append("</svg>\n")
    return "\n".join(out)
