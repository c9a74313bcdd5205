"""Numerical laboratory for a robustly transitive, persistently singular
endomorphism of the n-torus: expanding base 14x, a blended circle IFS on the
fiber, and a local surgery creating a critical set."""

from .torus_core import ConeSpec, Cube, DomainError, torus_diff, torus_dist, wrap
from .torus_maps import ConstructionParams, build_maps, describe, validate_params

__version__ = "0.1.0"

__all__ = [
    "ConeSpec",
    "ConstructionParams",
    "Cube",
    "DomainError",
    "build_maps",
    "describe",
    "torus_diff",
    "torus_dist",
    "validate_params",
    "wrap",
]
