"""Distances between stochastic SISO LTI systems in the frequency and time domains."""

__version__ = "0.1.0"
