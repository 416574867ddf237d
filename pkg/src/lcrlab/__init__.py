"""Numerical laboratory for local convexity of nonlinear maps between normed spaces."""

__version__ = "0.1.0"
