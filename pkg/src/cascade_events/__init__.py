"""Cascade decoding for overlapping event extraction."""

__version__ = "0.1.0"
