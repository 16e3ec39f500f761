"""Numerical verification of sharp geometric inequalities for free
boundary hypersurfaces in geodesic balls of the three space forms."""

__version__ = "0.1.0"

from .spaceform import SpaceForm, BallDomain, Potential
