"""Exception types shared across the package."""


class SymtaylorError(Exception):
    """Base class for all package errors."""


class DimensionError(SymtaylorError):
    """Inputs with incompatible phase-space dimensions."""


class NumericError(SymtaylorError):
    """A computation produced NaN/Inf; carries where it happened."""

    def __init__(self, message, step=None, substep=None):
        super().__init__(message)
        self.step = step
        self.substep = substep


class ConfigError(SymtaylorError):
    """Invalid run configuration or dataset specification."""
