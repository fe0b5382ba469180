"""Casimir-coupled MEMS resonator pair simulator and gradiometry analysis."""

__version__ = "0.1.0"
