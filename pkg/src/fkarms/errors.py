"""Exception types shared across the package."""


class ParameterError(ValueError):
    """Invalid geometric or model parameter."""


class ScaleTooSmallError(ParameterError):
    """Dyadic scale index below the smallest supported value."""


class ResourceError(RuntimeError):
    """Requested computation exceeds a hard size limit."""


class ConvergenceError(RuntimeError):
    """A Markov chain failed its convergence diagnostic.

    ``stats`` carries the replica statistics that triggered the failure.
    """

    def __init__(self, message, stats=None):
        super().__init__(message)
        self.stats = stats or {}
