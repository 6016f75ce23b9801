"""HTTP service wrapping the simulator: dataset generation, runs, sweeps, reports."""

from .app import create_app

__all__ = ["create_app"]
