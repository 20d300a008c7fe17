"""Functional difference equations with variable coefficients and their applications."""

__version__ = "1.0.0"
