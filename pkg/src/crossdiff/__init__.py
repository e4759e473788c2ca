"""Finite-volume and particle laboratory for porous-medium systems
with cross-gradient coupling, external potentials, and nonlocal
self-interaction drifts on an interval."""

__version__ = "0.1.0"
