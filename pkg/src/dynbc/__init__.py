"""Finite-dimensional laboratory for damped second-order systems with dynamic boundary conditions."""
__version__ = "0.1.0"
