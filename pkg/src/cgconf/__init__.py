"""Numerical conformality checks for tangent-bundle metrics of Cheeger-Gromoll type."""

__version__ = "0.1.0"
