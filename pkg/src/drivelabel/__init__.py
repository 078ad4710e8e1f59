"""Deterministic automatic video annotation pipeline for driving scenes."""

__version__ = "0.1.0"
