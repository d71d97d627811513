"""Parity-spin Bell-CHSH tests for continuous-variable two-mode states."""

__version__ = "0.1.0"
