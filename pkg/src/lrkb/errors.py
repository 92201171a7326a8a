"""Exception hierarchy shared across the package."""


class LrkbError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(LrkbError):
    """A system or configuration value violates its invariants."""


class ShapeError(ValidationError):
    """Matrix dimensions are inconsistent."""


class GapError(LrkbError):
    """A required spectral gap is absent or would split a conjugate pair."""


class FrameError(LrkbError):
    """An orthonormal-frame precondition failed."""


class ConvergenceError(LrkbError):
    """An iterative computation diverged or did not converge.

    ``time`` carries the flow/integration time at failure when known.
    """

    def __init__(self, message, time=None, residual=None):
        super().__init__(message)
        self.time = time
        self.residual = residual


class ConfigError(LrkbError):
    """A run configuration is malformed or out of range."""
