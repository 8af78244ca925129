"""Decoder calibration from surface-code syndrome correlations."""

__version__ = "0.1.0"
