"""Kinodynamic rapidly-exploring random forest for push-based rearrangement."""

__version__ = "0.1.0"
