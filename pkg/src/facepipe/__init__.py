"""Post-backbone facial analytics: statistical pooling of per-face embeddings
into video descriptors, linear classification, attribute heads, and
evaluation protocols."""

__version__ = "0.1.0"
