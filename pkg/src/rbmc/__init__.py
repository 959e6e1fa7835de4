"""Rao-Blackwellized estimators for Metropolis-Hastings and Jump Restore samplers."""

from .errors import DegenerateConfigurationError, SpecError

__version__ = "0.1.0"

__all__ = ["DegenerateConfigurationError", "SpecError", "__version__"]
