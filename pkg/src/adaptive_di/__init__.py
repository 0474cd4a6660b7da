"""Adaptive directed information with an expanding fixed-shares ensemble."""

from .ensemble import EnsembleHyper, EnsembleState, init_ensemble, run_ensemble, step
from .errors import (
    AdiError,
    DomainError,
    NumericalError,
    ParameterError,
    ParseError,
    StateError,
)
from .filters import FilterSpec, smoothed_value
from .gaussian_mi import gaussian_cmi, kernel_cov, kernel_mean
from .pipeline import PairConfig, compute_adi_series, compute_scene

__version__ = "0.1.0"

__all__ = [
    "AdiError",
    "DomainError",
    "EnsembleHyper",
    "EnsembleState",
    "FilterSpec",
    "NumericalError",
    "PairConfig",
    "ParameterError",
    "ParseError",
    "StateError",
    "compute_adi_series",
    "compute_scene",
    "gaussian_cmi",
    "init_ensemble",
    "kernel_cov",
    "kernel_mean",
    "run_ensemble",
    "smoothed_value",
    "step",
]
