"""Analysis and probability on an infinite tower of local fields.

Tower arithmetic, the Gaussian measure on the projective limit, its Fourier
transform, the fractional operator D^alpha, the heat semigroup and Monte Carlo
for the associated process.
"""
from .tower import (DEFAULT_ENUM_CAP, FieldElement, TameEisenstein, Tower, TowerError,
                    TowerLevel, TowerSpec, Unramified, build_tower)
from .lcfunc import LocallyConstantFunction, fourier_level, haar_integral, inverse_fourier_level
from .measure import CylindricalFunction, TruncatedPoint, integrate_mu, pairing
from .spectral import SpectralFunction, fhat, finv, image_check, plancherel
from .fractional import Multiplier, dalpha_hypersingular, dalpha_spectral, solve_poisson
from .heat import gamma_radial, heat_apply, pi_sphere_probs
from .process import sample_increments, sample_mu, simulate_paths

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_ENUM_CAP", "FieldElement", "TameEisenstein", "Tower", "TowerError", "TowerLevel",
    "TowerSpec", "Unramified", "build_tower", "LocallyConstantFunction", "fourier_level",
    "haar_integral", "inverse_fourier_level", "CylindricalFunction", "TruncatedPoint",
    "integrate_mu", "pairing", "SpectralFunction", "fhat", "finv", "image_check", "plancherel",
    "Multiplier", "dalpha_hypersingular", "dalpha_spectral", "solve_poisson", "gamma_radial",
    "heat_apply", "pi_sphere_probs", "sample_increments", "sample_mu", "simulate_paths",
]
