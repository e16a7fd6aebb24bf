"""Simulation lab for optimal automatizers of distributional proving problems."""

__version__ = "0.1.0"
