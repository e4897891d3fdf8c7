"""Nonlocal separability energies on product-domain grids."""

from .decompose import distance_report, nearest_separable, split
from .defect import defect_pairing, defect_total_variation, q_eval
from .energy import (critical_exponent_estimate, critical_p, energy_at_eps, energy_sweep,
                     monotonicity_check)
from .grid import EnergyParams, GridFunction, Kernel, ProductDomain, load_grid, sample, save_grid

__all__ = [
    "EnergyParams", "GridFunction", "Kernel", "ProductDomain",
    "critical_exponent_estimate", "critical_p", "defect_pairing", "defect_total_variation",
    "distance_report", "energy_at_eps", "energy_sweep", "load_grid", "monotonicity_check",
    "nearest_separable", "q_eval", "sample", "save_grid", "split",
]
__version__ = "0.1.0"
