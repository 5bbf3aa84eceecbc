"""Classical and learned unrolled solvers for compressed-sensing recovery."""

__version__ = "0.1.0"
