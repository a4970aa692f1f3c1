"""Zeta functions, complex dimensions and tube formulas for orbits of
one-dimensional parabolic and hyperbolic germs."""

__version__ = "0.1.0"
