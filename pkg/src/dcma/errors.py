"""Exception hierarchy shared by all modules."""


class DcmaError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(DcmaError, ValueError):
    """Invalid system or experiment configuration."""


class DomainError(DcmaError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class GridMismatchError(DcmaError, ValueError):
    """Spectra defined on different frequency grids were combined."""


class WindowOverflowError(DcmaError):
    """A signal does not fit in the time window and would wrap around."""


class InsufficientTrialsError(DcmaError):
    """A Monte Carlo run cannot resolve the requested probability."""
