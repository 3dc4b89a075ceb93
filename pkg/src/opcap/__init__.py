"""Operational-risk capital toolkit: SMA formula, compound Poisson LDA models and capital studies."""

__version__ = "0.1.0"
