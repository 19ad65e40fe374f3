"""Exception types shared across the package."""


class DataError(ValueError):
    """Malformed, inconsistent or unsupported input data."""


class NumericError(ArithmeticError):
    """A loss or gradient became non-finite."""


class ModelFormatError(ValueError):
    """A model file is truncated, has the wrong version, or inconsistent shapes."""
