"""Randomness engineering workbench: statistical batteries, min-entropy
bounds, Circulant extractors and the post-processing pipeline."""

__version__ = "0.1.0"
