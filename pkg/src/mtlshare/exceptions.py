"""Exception hierarchy shared by every module of the package."""


class ArgumentError(ValueError):
    """An argument is malformed, out of range, or dimensionally inconsistent."""


class PreconditionError(ValueError):
    """Inputs are well formed but violate a solver's mathematical precondition."""


class NumericalFailure(ArithmeticError):
    """A numerical routine failed to converge or produced non-finite values."""


class DivergenceError(NumericalFailure):
    """Training loss became non-finite or blew past the divergence guard."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class ConfigError(ArgumentError):
    """An experiment configuration is invalid."""
