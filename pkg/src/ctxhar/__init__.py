"""Streaming activity recognition with context-consistency refinement."""

__version__ = "0.1.0"
