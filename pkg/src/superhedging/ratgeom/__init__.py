"""Exact rational polyhedral kernel: double description, set algebra, LPs."""

from .lp import certified_feasible, solve_lp, solve_lp_lexmin
from .polyhedron import (
    HRep,
    Polyhedron,
    VRep,
    contains_point,
    dd_convert,
    intersect,
    intersect_all,
    is_subset,
    minkowski_sum,
    set_equal,
)

__all__ = [
    "HRep",
    "VRep",
    "Polyhedron",
    "dd_convert",
    "minkowski_sum",
    "intersect",
    "intersect_all",
    "contains_point",
    "is_subset",
    "set_equal",
    "solve_lp",
    "solve_lp_lexmin",
    "certified_feasible",
]
