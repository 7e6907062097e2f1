"""Switching-cost duopoly: equilibrium solver, comparative statics and GMM estimation."""

__version__ = "0.1.0"
