"""Finsler p-Laplace problems on long cylinders: solvers and asymptotic checks."""

__version__ = "0.1.0"
