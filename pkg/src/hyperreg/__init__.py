"""Sampling-based hypergraph regularization with exact verification oracles."""

__version__ = "0.1.0"
