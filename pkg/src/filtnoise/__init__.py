"""Filtered white noise, 2D turbulence diagnostics and synthetic transport fields."""

__version__ = "0.1.0"

from . import _backend

BACKEND = _backend.NAME

__all__ = ["BACKEND", "__version__"]
