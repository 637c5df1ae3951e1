"""Flexes of periodic triangulated surfaces in R^3."""

__version__ = "0.1.0"
