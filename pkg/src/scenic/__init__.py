"""Automatic state-space exploration for deterministic games."""

__version__ = "0.1.0"
