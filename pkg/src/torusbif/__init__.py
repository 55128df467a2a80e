"""Spectral computation of periodic orbits, their stability decompositions,
and the invariant tori branching from them at oscillatory instabilities."""

__version__ = "0.1.0"
