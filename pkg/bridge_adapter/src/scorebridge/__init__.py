"""Serve an arbitrary pair-scoring callable over the line bridge protocol."""

from .server import AdapterConfig, resolve_scorer, serve

__version__ = "0.1.0"
