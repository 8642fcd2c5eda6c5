"""Fractional neural attention: kernels, attention, spectral and graph analysis."""

__version__ = "0.1.0"
