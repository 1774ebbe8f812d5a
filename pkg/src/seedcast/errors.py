"""Exception types shared across the library."""


class ShapeError(ValueError):
    """Operands have incompatible shapes."""


class ConfigError(ValueError):
    """A configuration value is invalid or inconsistent."""


class DataError(ValueError):
    """Input data cannot be ingested or is too short for the task."""


class InputError(ValueError):
    """An argument is outside the operation's domain."""


class DegenerateInputError(ValueError):
    """Input carries no usable signal (e.g. zero total spectral power)."""


class NumericError(ArithmeticError):
    """A computation produced non-finite values."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""
