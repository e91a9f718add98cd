"""Sparse spectral methods on the annulus and disk built from semiclassical
Jacobi polynomials."""
__version__ = "0.1.0"
