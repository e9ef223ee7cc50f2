"""Weighted l1 compressed sensing with known support distributions."""

__version__ = "0.1.0"
