"""Simulation of 1D spinless-fermion chains with transverse-field Ising models."""

__version__ = "0.1.0"
