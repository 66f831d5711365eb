"""Exception types raised across the package."""


class CapriError(Exception):
    """Base class for all package errors."""


class InvalidArgument(CapriError, ValueError):
    pass


class InvalidMatrix(InvalidArgument):
    pass


class NotPSD(CapriError, ArithmeticError):
    pass


class Unsupported(CapriError, TypeError):
    pass


class DegenerateReward(InvalidArgument):
    pass


class ConfigError(CapriError, ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
