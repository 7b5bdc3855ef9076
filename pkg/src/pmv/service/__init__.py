"""HTTP service wrapping the engine, cost model, and ingestion."""

from .app import create_app

__all__ = ["create_app"]
