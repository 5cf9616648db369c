"""Commutative Jacobi fields on truncated symmetric Fock spaces."""

__version__ = "0.1.0"
