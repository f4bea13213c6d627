"""Exception types shared across the package."""


class UsageError(ValueError):
    """Bad arguments: wrong system variant, dimension mismatch, parameter out of range."""


class ConstructionError(RuntimeError):
    """An object could not be built (escaping orbits, too much truncated mass, budget overrun)."""

    def __init__(self, message, **info):
        super().__init__(message)
        self.info = info


class InsufficientDataError(ValueError):
    """Too few usable points survive censoring to fit a model."""


class UnsupportedCaseError(ValueError):
    """A symbolic composition that the rate table does not cover."""
