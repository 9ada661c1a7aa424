"""Cohomogeneity-one Kahler-Einstein 4-metrics: construction and verification."""

__version__ = "0.1.0"
