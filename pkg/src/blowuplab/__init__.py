"""Numerical laboratory for self-similar gradient blow-up in regularized shallow-water models."""

__version__ = "0.1.0"
