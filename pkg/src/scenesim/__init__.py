"""Deterministic real-time simulation of crowded rehabilitation scenes."""

__version__ = "0.1.0"
