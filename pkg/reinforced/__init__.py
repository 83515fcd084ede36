"""Simulation and verification of linearly edge-reinforced random walks on the half-line."""

__version__ = "0.1.0"
