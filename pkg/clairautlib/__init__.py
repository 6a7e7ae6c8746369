"""Numerical checks for Riemannian maps to almost-contact manifolds."""

__version__ = '0.1.0'
