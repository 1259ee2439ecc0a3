"""Simulation and exact evaluation of log lcm of random integer samples."""

__version__ = "0.1.0"
