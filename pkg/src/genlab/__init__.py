"""Generalization measurement lab for small biasless ReLU networks."""

__version__ = "0.1.0"
