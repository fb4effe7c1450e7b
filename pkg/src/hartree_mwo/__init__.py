"""Spectral solver and diagnostics for final-state problems of a Hartree
equation with a repulsive Coulomb term."""

from .errors import (CausticError, ConfigError, ContractViolation, DomainError,
                     MassDriftError, NumericalFailure, PicardDivergence)
from .grid import (ComplexField, GridSpec, Multiplier, RadialGrid, RealField, apply_multiplier,
                   forward_transform, inverse_laplacian, inverse_transform)
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CausticError", "ComplexField", "ConfigError", "ContractViolation",
    "DomainError", "GridSpec", "MassDriftError", "Multiplier", "NumericalFailure",
    "PicardDivergence", "RadialGrid", "RealField", "apply_multiplier", "forward_transform",
    "inverse_laplacian", "inverse_transform",
]
