"""Numerical laboratory for sparse domination and weighted inequalities on dyadic grids."""

__version__ = "0.1.0"
