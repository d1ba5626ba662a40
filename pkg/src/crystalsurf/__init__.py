"""Pseudo-spectral solver and verification suite for two fourth-order
crystal-surface evolution equations on the periodic torus."""

__version__ = "0.1.0"
