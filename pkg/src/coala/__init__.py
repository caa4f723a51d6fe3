"""COALA: co-aligned audio/tag autoencoders with contrastive alignment."""

__version__ = "0.1.0"
