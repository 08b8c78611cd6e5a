"""Quantum versus classical orbital-pair correlations of sparse CI wavefunctions."""

__version__ = "0.1.0"
