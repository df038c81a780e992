"""Exact and bosonic simulation of collective dark-state polariton memories."""

__version__ = "0.1.0"
