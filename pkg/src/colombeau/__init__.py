"""Numerical laboratory for manifold-valued Colombeau generalized functions."""

__version__ = "0.1.0"
