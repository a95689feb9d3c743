"""Verification benchmarks: exact solutions, reference tables, case drivers."""

from .exact import (bell_initial, couette_exact, kovasznay_exact,
                    kovasznay_lambda, shear_layer_initial)
from .metrics import (error_norms, fit_order, kinetic_energy, richardson_order,
                      simpson_integrate)
from .tables import eccentric_reference, ellipse_reference, ghia_reference

__all__ = [
    "bell_initial", "couette_exact", "kovasznay_exact", "kovasznay_lambda",
    "shear_layer_initial",
    "error_norms", "fit_order", "kinetic_energy", "richardson_order",
    "simpson_integrate",
    "eccentric_reference", "ellipse_reference", "ghia_reference",
]
