"""Wasserstein archetypal analysis: fit polygons to planar data in W2."""

__version__ = "0.1.0"
