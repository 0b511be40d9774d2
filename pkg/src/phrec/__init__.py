"""Phrase-aware content-based article recommendation."""

__version__ = "0.1.0"
