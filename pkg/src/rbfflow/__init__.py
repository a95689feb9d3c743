"""Meshless PHS-RBF solver for 2-D incompressible flow, with a verification CLI."""

from .cloud import PointCloud, build_clouds, FLAG_BOUNDARY, FLAG_INTERIOR
from .geometry import GeometrySpec, generate
from .gmsh_io import import_msh
from .operators import (BasisConfig, OperatorSet, assemble_local,
                        build_operator_set, eval_matrix, monomial_count,
                        operator_weights, phs, transform_cloud)
from .solver import (FlowState, FluidProps, FractionalStepSolver,
                     HyperviscosityConfig, TimeScheme, assemble_ppe,
                     hyperviscosity_term)
from .sparse import CsrMatrix, Factorization, factorize, rcm_order, solve

__version__ = "0.1.0"

__all__ = [
    "PointCloud", "build_clouds", "FLAG_BOUNDARY", "FLAG_INTERIOR",
    "GeometrySpec", "generate", "import_msh",
    "BasisConfig", "OperatorSet", "assemble_local", "build_operator_set",
    "eval_matrix", "monomial_count", "operator_weights", "phs",
    "transform_cloud",
    "FlowState", "FluidProps", "FractionalStepSolver", "HyperviscosityConfig",
    "TimeScheme", "assemble_ppe", "hyperviscosity_term",
    "CsrMatrix", "Factorization", "factorize", "rcm_order", "solve",
    "__version__",
]
