"""Harmonize heterogeneous EEG-like datasets onto a common representation
and classify trials with a Riemannian covariance pipeline."""

__version__ = "0.1.0"
