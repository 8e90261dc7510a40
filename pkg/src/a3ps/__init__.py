"""Advice-aided policy shaping on a desk-scale Frogger gridworld."""
__version__ = "0.1.0"
