"""Symbolic interior-point solving of lifted quadratic programs."""

__version__ = "0.1.0"
