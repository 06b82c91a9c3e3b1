"""Finite-space laboratory for discounted mean field team games."""

from mftg._core import (
    InvariantViolation,
    Model,
    Pmf,
    UsageError,
    linf_distance,
    perturbed_mean_mc,
    perturbed_mean_quadrature,
    reconstruct,
)

__all__ = [
    "InvariantViolation",
    "Model",
    "Pmf",
    "UsageError",
    "linf_distance",
    "perturbed_mean_mc",
    "perturbed_mean_quadrature",
    "reconstruct",
]
