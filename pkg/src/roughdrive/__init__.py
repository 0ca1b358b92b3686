"""Numerics for linear equations driven by bounded and unbounded rough drivers."""

__version__ = "0.1.0"
