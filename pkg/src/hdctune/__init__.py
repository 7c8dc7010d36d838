"""Hyperdimensional classification with RP/RFF encoders, exact op counting and a constrained tuner."""

__version__ = "0.1.0"
