"""Depth-aware tracking-by-detection with soft instance depth labels."""

__version__ = "0.1.0"
