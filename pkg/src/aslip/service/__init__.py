"""FastAPI service exposing planning, simulation and batch experiments."""
from .app import app

__all__ = ["app"]
