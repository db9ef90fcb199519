"""Exception types raised by the package."""


class KernelDomainError(ValueError):
    """Pair kernel evaluated outside its domain (xi <= 0)."""


class PackingError(RuntimeError):
    """Hard-core rejection sampling ran out of attempts."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature could not reach the requested tolerance."""

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class EigenSolverError(RuntimeError):
    """Dense eigensolver failed or returned an ill-conditioned basis."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class NoSignChangeError(ValueError):
    """Root search bracket does not contain a sign change."""


class FitError(RuntimeError):
    """Lineshape fit failed or the spectrum is not unimodal."""


class ConfigError(ValueError):
    """Invalid run configuration; ``path`` names the offending field."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
