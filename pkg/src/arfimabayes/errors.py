class ParameterDomainError(ValueError):
    """A parameter lies outside the stationary/invertible region."""


class NumericalError(ArithmeticError):
    """A covariance matrix failed to factorize or a series failed to converge."""


class InputError(ValueError):
    """Malformed user input (files, columns, configuration)."""


class WorkerError(RuntimeError):
    """A simulation worker failed; partial results may have been written."""
