"""Numerical laboratory for the clamped plate operator Delta^2 - gamma*Delta.

Finite-difference solves on masked grids, De Giorgi and Harnack-type
inequality checkers with calibrated constants, and positivity scans in gamma.
"""

from .exponents import ExponentError, ExponentSet, default_exponents, derive_exponents, validate_exponents
from .geometry import Ball, DomainMask, GeometryError, build_domain, chain_of_balls, check_interior_sphere
from .harnack import chain_bound, classify_levels, harnack_check
from .levelset import CheckReport, check_iterated_estimate, check_level_estimate, check_poincare_half, degiorgi_d, degiorgi_iterate, level_stats
from .linalg import SolverError, SparseMatrix, solve_spd, spmv
from .plate import ScalarField, assemble_plate, energy_report, gradient_constant, solve_plate
from .positivity import compute_gamma0, decompose_source, exhaustion, interpolation_scan, scan_gamma

__version__ = "0.1.0"

__all__ = [
    "Ball",
    "CheckReport",
    "DomainMask",
    "ExponentError",
    "ExponentSet",
    "GeometryError",
    "ScalarField",
    "SolverError",
    "SparseMatrix",
    "assemble_plate",
    "build_domain",
    "chain_bound",
    "chain_of_balls",
    "check_interior_sphere",
    "check_iterated_estimate",
    "check_level_estimate",
    "check_poincare_half",
    "classify_levels",
    "compute_gamma0",
    "decompose_source",
    "default_exponents",
    "degiorgi_d",
    "degiorgi_iterate",
    "derive_exponents",
    "energy_report",
    "exhaustion",
    "gradient_constant",
    "harnack_check",
    "interpolation_scan",
    "level_stats",
    "scan_gamma",
    "solve_plate",
    "solve_spd",
    "spmv",
    "validate_exponents",
]
