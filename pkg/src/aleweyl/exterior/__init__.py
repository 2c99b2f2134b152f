"""Numerics on exterior domains: annulus grids, weighted Hölder proxies,
the exterior Poisson solver, harmonic tails, and the harmonic-map correction."""

from .grid import AnnulusGrid, WeightedField, sphere_quadrature, weighted_norm
from .harmonics import HarmonicBasis
from .poisson import solve_poisson_exterior, harmonic_tail_fit, HarmonicTail
from .maps import (
    bianchi_residual,
    composition_bound_check,
    decay_slope,
    harmonic_map_correction,
)

__all__ = [
    "AnnulusGrid",
    "WeightedField",
    "sphere_quadrature",
    "weighted_norm",
    "HarmonicBasis",
    "solve_poisson_exterior",
    "harmonic_tail_fit",
    "HarmonicTail",
    "bianchi_residual",
    "composition_bound_check",
    "decay_slope",
    "harmonic_map_correction",
]
