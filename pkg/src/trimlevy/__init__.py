"""Simulation and verification of large-trimming limits for driftless subordinators."""

from .models import (
    DomainError,
    LevyTailModel,
    LogPowerModel,
    ModelError,
    SlowTailModel,
    StableModel,
    TabulatedModel,
    model_from_spec,
    validate_model,
)

__version__ = "0.1.0"
