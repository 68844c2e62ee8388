"""Locally robust (Neyman-orthogonal) moments for models with unobserved heterogeneity."""

__version__ = "0.1.0"
