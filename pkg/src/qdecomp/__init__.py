"""Question decomposition: computation trees, decomposers, supervision and evaluation."""

__version__ = "0.1.0"
