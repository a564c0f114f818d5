"""Movable-antenna near-field ISAC: simulation, estimation, localization, metrics."""

__version__ = "0.1.0"
