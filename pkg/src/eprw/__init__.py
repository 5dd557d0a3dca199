"""Simulation of two EPR pairs merged into a three-photon W state on a polarization-dependent beam splitter."""

__version__ = "0.1.0"
