"""Exception hierarchy shared across the package."""


class RingtraceError(Exception):
    """Base class for all ringtrace errors."""


class CrystalDataError(RingtraceError):
    """Crystal database file is missing, malformed, or violates an invariant."""


class WavelengthRangeError(RingtraceError):
    """Wavelength outside the validity range of a dispersion model."""


class NoSolutionError(RingtraceError):
    """No phase-matched solution exists for the requested configuration."""


class ConvergenceError(RingtraceError):
    """An iterative solver hit its iteration cap without converging."""

    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


class GeometryError(RingtraceError):
    """Geometrically impossible request (total internal reflection, optic axis)."""


class FitError(RingtraceError):
    """Nonlinear fit failed to converge."""

    def __init__(self, message, best_model=None):
        super().__init__(message)
        self.best_model = best_model
