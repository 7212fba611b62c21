"""Dissipative variational eigensolver toolkit for the 2D Z2 lattice gauge theory."""

from .lattice import LatticeGeometry, build_lattice

__all__ = ["LatticeGeometry", "build_lattice"]
__version__ = "0.1.0"
