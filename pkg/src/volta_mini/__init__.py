"""Equivalence checking for structured GPU-style kernels over the reals."""

__version__ = "0.1.0"
