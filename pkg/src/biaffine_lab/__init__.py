"""Biaffine dependency parsing with switchable score normalization, plus rank and variance analysis tools."""

__version__ = "0.1.0"
