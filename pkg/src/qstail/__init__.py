"""Numerics for the tails of the limiting Quicksort distribution."""

__version__ = "0.1.0"
