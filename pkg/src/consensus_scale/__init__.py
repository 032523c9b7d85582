"""Spectral scaling and grounding fragility of nth-order consensus networks."""

__version__ = "0.1.0"
