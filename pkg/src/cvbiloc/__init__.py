"""Bilocality tests for continuous-variable states with pseudospin measurements."""

__version__ = "0.1.0"
