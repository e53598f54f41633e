"""Exact polytope kernel: hulls, face lattices, normal cones and flat distances."""

from .cones import Arc, SphericalCone, exact_solid_angle_3, solid_angle
from .core import Face, Polytope, box, build, cube, exact_volume, intersect, sample_face, simplex, union_is_convex
from .distance import (
    BatchProjection,
    Intersects,
    ProjectionTriple,
    flat_distance,
    hausdorff_distance,
    min_norm_point,
    parallel_flat_distance,
    point_distance,
    project_flats,
)
from .hull import HullError, brute_force_facets
from .io import dump_vertices, load_polytope, parse_vertices, save_polytope

__all__ = [
    "Arc",
    "SphericalCone",
    "solid_angle",
    "exact_solid_angle_3",
    "Face",
    "Polytope",
    "build",
    "box",
    "cube",
    "simplex",
    "sample_face",
    "exact_volume",
    "intersect",
    "union_is_convex",
    "HullError",
    "BatchProjection",
    "Intersects",
    "ProjectionTriple",
    "flat_distance",
    "hausdorff_distance",
    "min_norm_point",
    "parallel_flat_distance",
    "point_distance",
    "project_flats",
    "brute_force_facets",
    "parse_vertices",
    "load_polytope",
    "dump_vertices",
    "save_polytope",
]
