"""Spiking neural network voice activity detection."""

__version__ = "0.1.0"
