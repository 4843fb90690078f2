"""Radially symmetric numerical laboratory for the 2D parabolic-parabolic Keller-Segel system."""

__version__ = "0.1.0"
