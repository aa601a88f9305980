"""decaylab: a desk-scale laboratory for multiplicative convolutions of
measures on the line - dyadic grid measures, additive/multiplicative box
convolutions, Riesz s-energies, Fourier-decay profiling, discretized-set
combinatorics, and reproducible experiment pipelines.
"""

__version__ = "0.1.0"

from .convolution import convolve, difference_product, multiply_log_fast, power
from .dyadic import (BranchingFunction, DyadicGridSet, additive_energy,
                     branching_function, covering_number, project,
                     projection_scan, set_check, superlinear_decompose,
                     uniformize)
from .energy import (EnergyReport, FrostmanReport, energy_fourier,
                     energy_report, energy_spatial, exceptional_set,
                     extract_nonconcentrated, frostman_constant)
from .measures import (GridMeasure, Kernel, OVERSAMPLE_BITS, from_atoms,
                       from_density, from_masses, l1_distance, point_mass,
                       pushforward_affine, regularize, restrict_normalize,
                       sup_ball_mass, uniform_measure)
from .spectral import (DecayProfile, decay_profile, fourier_at, fourier_many,
                       l2_at_scale, order_check, product_chain_fourier,
                       product_fourier, product_transform_bound)

__all__ = [
    "__version__",
    "GridMeasure", "Kernel", "OVERSAMPLE_BITS",
    "from_density", "from_atoms", "from_masses", "uniform_measure", "point_mass",
    "regularize", "pushforward_affine", "restrict_normalize", "sup_ball_mass",
    "l1_distance",
    "convolve", "power", "difference_product", "multiply_log_fast",
    "fourier_at", "fourier_many", "product_fourier", "product_chain_fourier",
    "l2_at_scale", "DecayProfile", "decay_profile", "product_transform_bound",
    "order_check",
    "energy_spatial", "energy_fourier", "energy_report", "EnergyReport",
    "FrostmanReport", "frostman_constant", "exceptional_set",
    "extract_nonconcentrated",
    "DyadicGridSet", "BranchingFunction", "covering_number", "set_check",
    "uniformize", "branching_function", "superlinear_decompose", "project",
    "projection_scan", "additive_energy",
]
