"""Numerical toolkit for a Grassmann-integral renormalization group map on a finite lattice."""

__version__ = "0.1.0"
