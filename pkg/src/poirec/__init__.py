"""Personalized context-aware POI recommendation."""

__version__ = "0.1.0"
