"""Parisi constant numerics and extremal cuts of sparse random graphs."""

__version__ = "0.1.0"
