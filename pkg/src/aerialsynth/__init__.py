"""Artificial aerial vehicle imagery and the dataset plumbing around it."""

__version__ = "0.1.0"
