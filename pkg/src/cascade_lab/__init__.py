"""Desk-scale laboratory for resonant energy cascades in the cubic NLS on the 2-torus."""

from ._accel import BACKEND
from .toy import (ExactOrbit, OrbitKind, ToyParams, ToyState, exact_orbit_point, toy_hamiltonian,
                  toy_mass, toy_rhs)

__version__ = "0.1.0"
SCHEMA_VERSION = "1.0"

__all__ = [
    "BACKEND",
    "SCHEMA_VERSION",
    "ExactOrbit",
    "OrbitKind",
    "ToyParams",
    "ToyState",
    "exact_orbit_point",
    "toy_hamiltonian",
    "toy_mass",
    "toy_rhs",
]
