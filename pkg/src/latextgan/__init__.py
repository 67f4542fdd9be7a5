"""Adversarial text generation with soft-text and latent-code critics."""

__version__ = "0.1.0"
