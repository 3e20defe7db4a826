"""Simulation and verification toolkit for doubly nonlinear stochastic evolution equations."""

__version__ = "0.1.0"
