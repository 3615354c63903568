"""Out-of-time-ordered correlator simulator for fermion-linear-optics circuits
interspersed with two-qubit diagonal interaction gates.

The package computes infinite-temperature OTO correlators of 1D qubit chains
whose dynamics decompose into free-fermion (matchgate) layers plus a small
number of quartic interaction gates.  Three engines are provided:

* exact determinantal summation over interaction-gate configurations,
* a conditional replacement scheme that keeps the evolution free-fermionic
  by monitoring operator weight at the support boundary,
* a dense Hilbert-space reference for small systems.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .modes import (
    PauliObservable,
    jordan_wigner_encode,
    jordan_wigner_decode,
    minor,
    cauchy_binet,
    modified_cauchy_binet,
    interaction_image,
)
from .circuits import (
    GaussianGenerator,
    GaussianLayer,
    InteractionLayer,
    Circuit,
    DisorderRealization,
    build_xy_generator,
    exponentiate_generator,
    fswap_matrix,
    build_alternating_circuit,
    draw_disorder,
)
from .gaussian import gaussian_otoc, boundary_weight, boundary_profile, BoundaryProfile
from .exact import AssembledEvolution, exact_otoc, exact_lightcone
from .approx import ApproxState, conditional_replace, approx_step, compute_lightcone
from .dense import dense_evolve, dense_otoc, dense_majorana_amplitudes, dense_lightcone
from .experiments import (
    LightconeGrid,
    EnsembleSpec,
    run_ensemble,
    optimize_epsilon,
    svd_principal_vector,
    asymptotic_value,
)

__all__ = [
    "PauliObservable",
    "jordan_wigner_encode",
    "jordan_wigner_decode",
    "minor",
    "cauchy_binet",
    "modified_cauchy_binet",
    "interaction_image",
    "GaussianGenerator",
    "GaussianLayer",
    "InteractionLayer",
    "Circuit",
    "DisorderRealization",
    "build_xy_generator",
    "exponentiate_generator",
    "fswap_matrix",
    "build_alternating_circuit",
    "draw_disorder",
    "gaussian_otoc",
    "boundary_weight",
    "boundary_profile",
    "BoundaryProfile",
    "AssembledEvolution",
    "exact_otoc",
    "exact_lightcone",
    "ApproxState",
    "conditional_replace",
    "approx_step",
    "compute_lightcone",
    "dense_evolve",
    "dense_otoc",
    "dense_majorana_amplitudes",
    "dense_lightcone",
    "LightconeGrid",
    "EnsembleSpec",
    "run_ensemble",
    "optimize_epsilon",
    "svd_principal_vector",
    "asymptotic_value",
]
