"""Numerical and symbolic toolkit for local laws of sample covariance and Wigner matrices."""

__version__ = "0.1.0"
