"""Finite-difference solvers for two Buruli ulcer reaction-taxis-diffusion models."""

__version__ = "0.1.0"
