"""Quanvolutional feature extraction and adversarial robustness benchmarking."""

__version__ = "0.1.0"
