"""Bayesian optimization with randomized UCB confidence parameters.

The package provides exact GP regression on finite candidate sets, a
family of confidence-parameter schedules (deterministic, Gamma-randomized,
and shifted-exponential), UCB/EI/posterior-sampling acquisitions, a
replicated experiment engine, closed-form regret-bound calculators with
Monte-Carlo verification harnesses, problem generators, and a
configuration-driven CLI (``randbo``).
"""

from . import acquisition, analysis, bench, confidence, engine, gp
from .errors import (
    ConfigurationError,
    DomainError,
    IngestionError,
    NumericalError,
    ObservationError,
    RandboError,
)

__version__ = "0.1.0"

__all__ = [
    "acquisition",
    "analysis",
    "bench",
    "confidence",
    "engine",
    "gp",
    "RandboError",
    "ConfigurationError",
    "ObservationError",
    "NumericalError",
    "DomainError",
    "IngestionError",
    "__version__",
]
