"""Vibration modes of plane elastic solids with lowest-order virtual elements."""

from .adapt import AdaptiveStep, adaptive_loop, mark, refine_fem, refine_vem
from .eig import EigenSolution, frequencies, solve_smallest
from .estimator import EstimatorReport, indicator
from .fitting import ConvergenceFit, fit_convergence, loglog_slope
from .mesh import (
    PolyMesh,
    check_assumptions,
    element_geometry,
    generate_hexagonal_mesh,
    generate_trapezoidal_mesh,
    generate_triangle_mesh,
    generate_vessel_mesh,
    subtriangulate,
)
from .vem import Material, assemble, lame_from_engineering, local_operators

__version__ = "0.1.0"

__all__ = [
    "AdaptiveStep",
    "ConvergenceFit",
    "EigenSolution",
    "EstimatorReport",
    "Material",
    "PolyMesh",
    "adaptive_loop",
    "assemble",
    "check_assumptions",
    "element_geometry",
    "fit_convergence",
    "frequencies",
    "generate_hexagonal_mesh",
    "generate_trapezoidal_mesh",
    "generate_triangle_mesh",
    "generate_vessel_mesh",
    "indicator",
    "lame_from_engineering",
    "local_operators",
    "loglog_slope",
    "mark",
    "refine_fem",
    "refine_vem",
    "solve_smallest",
    "subtriangulate",
]
