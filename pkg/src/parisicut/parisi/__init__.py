"""Parisi functional: PDE and recursion evaluators, minimization, beta -> oo fit."""

from .functional import (
    RS_BOUND,
    OptimizerSettings,
    ParisiMinimum,
    PstarEstimate,
    estimate_pstar,
    extrapolate,
    minimize_parisi,
    parisi_functional,
    rescale,
)
from .pde import PdeField, PdeGrid, StabilityError, log2cosh, solve_pde
from .profile import RsbProfile
from .recursion import gauss_hermite, recursion_value

__all__ = [
    "RS_BOUND", "OptimizerSettings", "ParisiMinimum", "PdeField", "PdeGrid", "PstarEstimate",
    "RsbProfile", "StabilityError", "estimate_pstar", "extrapolate", "gauss_hermite",
    "log2cosh", "minimize_parisi", "parisi_functional", "recursion_value", "rescale", "solve_pde",
]
