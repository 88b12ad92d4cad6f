"""Adaptive parameter tuning for a classical 2D navigation stack."""

__version__ = "0.1.0"
