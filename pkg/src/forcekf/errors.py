"""Exception types shared across the package.

The CLI maps these onto exit codes: config/data problems exit 2,
numerical failures exit 3.
"""


class ForceKfError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(ForceKfError):
    """Invalid or inconsistent configuration (bad key, bad value, violated bound)."""


class DataFormatError(ForceKfError):
    """Malformed or inconsistent input data; message carries file and line when known."""


class OrderingError(ForceKfError):
    """A measurement or propagation step would move the filter clock backwards."""


class NumericalError(ForceKfError):
    """An update or solve failed numerically (singular innovation, divergence)."""


class EvaluationError(ForceKfError):
    """Metric preconditions not met (insufficient overlap or matches)."""
