"""Bi-harmonic maps from the unit 4-ball into spheres: discretization, heat flow and inequality checks."""
__version__ = "0.1.0"
