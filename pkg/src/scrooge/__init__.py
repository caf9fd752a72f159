"""Numerical laboratory for Scrooge ensembles of pure states."""

__version__ = "0.1.0"
