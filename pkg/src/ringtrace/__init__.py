"""Emission-ring geometry for collinear-degenerate parametric down-conversion."""

from .errors import (
    RingtraceError,
    CrystalDataError,
    WavelengthRangeError,
    NoSolutionError,
    ConvergenceError,
    GeometryError,
    FitError,
)
from .dispersion import get_crystal, load_crystal_database, default_database_path

__all__ = [
    "RingtraceError",
    "CrystalDataError",
    "WavelengthRangeError",
    "NoSolutionError",
    "ConvergenceError",
    "GeometryError",
    "FitError",
    "get_crystal",
    "load_crystal_database",
    "default_database_path",
]

__version__ = "1.0.0"
