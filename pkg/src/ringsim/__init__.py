"""Simulation suite for a six-island Josephson ring qubit with symmetry-protected states."""

__version__ = "0.1.0"
