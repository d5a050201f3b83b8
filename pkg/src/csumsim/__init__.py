"""Two-photon simulator for a 16-dimensional controlled-SUM gate."""

__version__ = "0.1.0"
