"""Contrastive motion representations, representativeness ranking, and fast
human-in-the-loop annotation for skeleton motion capture data."""

__version__ = "0.1.0"
