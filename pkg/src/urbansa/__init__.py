"""Aspect-based sentiment analysis for geo-located urban POI reviews."""

__version__ = "0.1.0"
