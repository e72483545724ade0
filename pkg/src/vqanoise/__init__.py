"""Stochastic gate-angle noise in variational quantum circuits."""

__version__ = "0.1.0"
