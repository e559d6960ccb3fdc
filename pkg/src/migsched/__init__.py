"""Power-cap and partition co-scheduling decisions from counter-based regression models."""

__version__ = "0.1.0"
