"""Squared-loss mutual information from positive-unlabeled data."""

__version__ = '1.0.0'
