"""Test bench for sampled prescribed-time control of a scalar uncertain plant."""

from .model import (Controller, Plant, Trajectory, UncertaintyClass, named_psi,
                    validate_membership)
from .runner import SimOptions, simulate

__version__ = "0.1.0"

__all__ = ["Controller", "Plant", "Trajectory", "UncertaintyClass", "named_psi",
           "validate_membership", "SimOptions", "simulate"]
