"""Interpretable face-swap deepfake detection from facial Action Unit dynamics."""

__version__ = "1.0.0"
