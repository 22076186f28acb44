"""Exception hierarchy shared across the package.

Each class maps to one CLI exit code so failures surface consistently
whether a function is called from Python or from the command line.
"""


class ImpactflowError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigurationError(ImpactflowError):
    """Invalid parameter set or malformed configuration file."""

    exit_code = 1


class TapeFormatError(ImpactflowError):
    """Malformed tape/price CSV input or unreadable output target."""

    exit_code = 2


class NumericalError(ImpactflowError):
    """A numerical routine failed to converge or produced garbage."""

    exit_code = 3


class InsufficientDataError(ImpactflowError):
    """Estimator asked for more windows/trades than the tape provides."""

    exit_code = 3
