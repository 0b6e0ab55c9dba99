"""Simulator for two-photon and coherent-state interferometry under competing pilot-wave models."""

__version__ = "0.1.0"
