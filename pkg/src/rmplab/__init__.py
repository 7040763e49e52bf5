"""Numerical laboratory for products of i.i.d. random matrices."""

__version__ = "0.1.0"
