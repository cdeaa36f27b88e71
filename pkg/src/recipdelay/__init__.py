"""Reciprocal-relation delay analytics and DPRR delay prediction."""

__version__ = "0.1.0"
