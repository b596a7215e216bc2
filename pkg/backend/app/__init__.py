"""Weighted tent-space verification toolkit."""

__version__ = "1.0.0"
