"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where a quantity is defined."""


class DimensionError(ValueError):
    """Vector or matrix shapes do not line up."""


class CapExceededError(RuntimeError):
    """A user-scaling schedule asks for more users than the configured cap."""

    def __init__(self, message, snr_db=None, users=None):
        super().__init__(message)
        self.snr_db = snr_db
        self.users = users
