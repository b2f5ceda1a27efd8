"""Simulation and inference for single-photon vision experiments."""

__version__ = "0.1.0"
