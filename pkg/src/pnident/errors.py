"""Exception types shared across the package."""


class PnidentError(Exception):
    """Base class for all package-specific errors."""


class DegenerateGeometryError(PnidentError):
    """Engagement geometry collapsed (non-positive range or zero relative motion)."""


class NumericalBlowupError(PnidentError):
    """Integration produced a non-finite state."""

    def __init__(self, step: int, time: float, message: str = ""):
        self.step = step
        self.time = time
        super().__init__(
            message or f"non-finite state at step {step} (t={time:.6g} s)"
        )


class ConfigurationError(PnidentError, ValueError):
    """Inconsistent or invalid configuration values."""


class InsufficientDataError(PnidentError):
    """Operation requires more samples than were provided."""


class UnidentifiableError(PnidentError):
    """Least-squares system is rank deficient; parameters cannot be resolved."""


class DivergenceError(PnidentError):
    """Training produced a non-finite loss or gradient."""

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"non-finite loss/gradient at iteration {step}")
