"""Exception types shared across the package."""


class DimensionMismatch(ValueError):
    """A vector argument has the wrong length for the target object."""


class NumericalFailure(RuntimeError):
    """An iterative routine failed to converge or produced non-finite values.

    Attributes carry enough context to diagnose the failure (residual for
    projections, step/epoch index for solver loops).
    """

    def __init__(self, message, *, residual=None, step=None, epoch=None):
        super().__init__(message)
        self.residual = residual
        self.step = step
        self.epoch = epoch


class ConfigurationError(ValueError):
    """A run configuration is inconsistent (unknown names, bad ranges, ...)."""


class ConstructionError(ValueError):
    """Testbed parameters fall outside the verified-admissible range."""
