"""Numerical testbed for minimal output entropy of one-mode Gaussian channels."""

__version__ = "0.1.0"
