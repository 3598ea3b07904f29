"""Simulation and analysis tools for Goldilocks quantum cellular automata."""

__version__ = "0.1.0"
