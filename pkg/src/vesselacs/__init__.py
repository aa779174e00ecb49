"""Retinal vessel segmentation toolkit: per-pixel features, six selection
heuristics, and an Ant Colony System pixel classifier."""

__version__ = "0.1.0"
