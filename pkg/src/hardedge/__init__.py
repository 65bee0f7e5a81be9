"""Hard-edge universality for convex beta-ensembles in bidiagonal form."""
from .errors import ConfigError, HardEdgeError, NumericalError, StatisticalCheckFailure
from .hamiltonian import (
    HamiltonianParams,
    grad_hamiltonian,
    hamiltonian,
    hessian_hamiltonian,
    minimize,
)
from .potential import LINEAR, ScalingFunctions, validate_potential
from .sampler import ChainConfig, sample_laguerre_exact, sample_mcmc
from .spectra import hard_edge_factor, sbo_spectrum, smallest_eigs, sturm_eigs

__version__ = "0.1.0"

__all__ = [
    "ChainConfig",
    "ConfigError",
    "HamiltonianParams",
    "HardEdgeError",
    "LINEAR",
    "NumericalError",
    "ScalingFunctions",
    "StatisticalCheckFailure",
    "grad_hamiltonian",
    "hamiltonian",
    "hard_edge_factor",
    "hessian_hamiltonian",
    "minimize",
    "sample_laguerre_exact",
    "sample_mcmc",
    "sbo_spectrum",
    "smallest_eigs",
    "sturm_eigs",
    "validate_potential",
]
