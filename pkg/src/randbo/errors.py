"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes, so library code should raise
the most specific class that applies rather than bare ValueError.
"""


class RandboError(Exception):
    """Base class for all package errors."""


class ConfigurationError(RandboError):
    """Invalid parameters, malformed configs, or out-of-theory settings."""


class ObservationError(RandboError):
    """Non-finite or otherwise unusable observation values."""


class NumericalError(RandboError):
    """Linear-algebra breakdown that survived jitter escalation."""


class DomainError(RandboError):
    """Query point outside a benchmark function's domain."""


class IngestionError(RandboError):
    """Tabular input that cannot be parsed into a problem instance."""
