"""Novel-view RGB-D augmentation for posed driving sequences."""

__version__ = "0.1.0"
