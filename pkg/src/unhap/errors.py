class UnhapError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(UnhapError, ValueError):
    """Invalid configuration or parameter values."""


class DataError(UnhapError, ValueError):
    """Malformed or unusable event data."""


class DivergenceError(UnhapError, RuntimeError):
    """The optimiser produced non-finite losses it could not recover from."""
