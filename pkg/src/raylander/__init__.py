"""Rays, landing points and basins for f_a(z) = a (e^z (z - 1) + 1)."""

__version__ = "0.1.0"
