"""HTTP service wrapping the gazedyn package."""

from .app import create_app

__all__ = ["create_app"]
