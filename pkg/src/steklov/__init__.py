"""Steklov-type eigenvalues ``Delta u = u``, ``du/dnu = lambda u`` on deformed disks.

Finite-element solver on a fixed reference disk with pulled-back forms,
Hadamard shape derivatives of eigenvalue clusters, criticality diagnostics
under volume and perimeter constraints, and closed-form disk oracles.
"""

__version__ = "0.1.0"

from .estimator import ConstrainedFlow, HadamardGradient, SteklovEigensolver
from .exceptions import (
    ClusterBroken,
    GapViolation,
    NonDiffeo,
    NotACluster,
    SteklovError,
    SteklovNumericalError,
    SteklovValidationError,
)
from .fem import AssembledPencil, DiskMesh, assemble, build_disk_mesh
from .geometry import DiffeoMap, PerturbSpec, ShapeSpec, boundary_frame, eval_map
from .shapegrad import (
    Constraint,
    boundary_density,
    constrained_flow,
    criticality_report,
    fd_derivative,
    hadamard_derivative,
)
from .spectrum import Normalization, detect_cluster, renormalize, solve_pencil, sym_functions

__all__ = [
    "AssembledPencil",
    "ClusterBroken",
    "ConstrainedFlow",
    "Constraint",
    "DiffeoMap",
    "DiskMesh",
    "GapViolation",
    "HadamardGradient",
    "NonDiffeo",
    "Normalization",
    "NotACluster",
    "PerturbSpec",
    "ShapeSpec",
    "SteklovEigensolver",
    "SteklovError",
    "SteklovNumericalError",
    "SteklovValidationError",
    "assemble",
    "boundary_density",
    "boundary_frame",
    "build_disk_mesh",
    "constrained_flow",
    "criticality_report",
    "detect_cluster",
    "eval_map",
    "fd_derivative",
    "hadamard_derivative",
    "renormalize",
    "solve_pencil",
    "sym_functions",
]
