"""Single-mode pair spectra for a crossed two-crystal sandwich.

A thin-crystal model: the signal is held on the collection-mode axis, the
idler direction follows from transverse momentum conservation, and the
differential pair rate at each frequency offset is the longitudinal
sinc^2(dk_z L / 2) weighted by a Gaussian angular acceptance for the idler's
miss of its own mode axis. The second crystal of the sandwich produces the
same ring rotated 90 deg in azimuth, so its spectrum at azimuth phi is the
first crystal's model evaluated at phi + 90 deg.

This is a deliberately simplified model: qualitative orderings and the
high-overlap band are meaningful; absolute rates are not.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import indicatrix
from .errors import NoSolutionError, GeometryError
from .phasematch import PumpConfig, RingTrace, idler_wavelength_nm

C_M_PER_S = 2.99792458e8
TWO_PI = 2.0 * math.pi

#: 2001 points over +-6e13 rad/s: covers a 20 nm band around 810 nm
DEFAULT_GRID = np.linspace(-6.0e13, 6.0e13, 2001)


@dataclass(frozen=True)
class CollectionMode:
    """Single-mode collection geometry: exterior mode axis and waist."""

    theta_ext: float  # exterior polar angle of the mode axis, radians
    phi: float        # azimuth in the pump-local frame
    waist_um: float   # Gaussian 1/e^2 mode radius at the crystal
    fiber: bool = True

    def __post_init__(self):
        if self.waist_um <= 0:
            raise ValueError("collection waist must be positive")

    def divergence(self, lambda_nm: float) -> float:
        """Far-field half-angle of the Gaussian mode, radians."""
        return (lambda_nm * 1e-9) / (math.pi * self.waist_um * 1e-6)


@dataclass(frozen=True)
class SpectrumCurve:
    """Differential pair rate vs angular-frequency offset from degeneracy."""

    grid: np.ndarray   # rad/s, strictly increasing, symmetric about 0
    values: np.ndarray

    def __post_init__(self):
        g, v = np.asarray(self.grid, float), np.asarray(self.values, float)
        if g.shape != v.shape or g.ndim != 1:
            raise ValueError("grid and values must be 1-d arrays of equal length")
        if np.any(np.diff(g) <= 0):
            raise ValueError("frequency grid must be strictly increasing")
        if np.any(v < 0):
            raise ValueError("spectrum values must be non-negative")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)

    @property
    def peak(self) -> float:
        return float(np.max(self.values))

    def area(self) -> float:
        return float(np.trapz(self.values, self.grid))


@dataclass(frozen=True)
class OverlapResult:
    overlap: float
    rate_1: float
    rate_2: float
    collection: CollectionMode


def _check_symmetric(grid: np.ndarray):
    if not np.allclose(grid, -grid[::-1], rtol=0, atol=1e-6 * max(1.0, abs(grid[-1]))):
        raise ValueError("frequency grid must be symmetric about zero")


def midpoint_collection(
    trace_1: RingTrace, trace_2: RingTrace, phi: float, waist_um: float
) -> CollectionMode:
    """Mode axis bisecting the two sandwich rings at one azimuth."""

    def ext(trace):
        try:
            return trace.sample_at(phi).theta_s_ext
        except NoSolutionError:
            warnings.warn(
                f"no exact ring sample at phi = {math.degrees(phi):.1f} deg; "
                "interpolating from neighbors",
                stacklevel=2,
            )
            return trace.interpolate_ext(phi)

    pointing = 0.5 * (ext(trace_1) + ext(trace_2))
    return CollectionMode(theta_ext=pointing, phi=phi, waist_um=waist_um)


def _snell_invert(species, lambda_nm, theta_p, phi_p, phi_s, theta_ext, branch):
    """Internal wave-normal polar offset whose refraction hits theta_ext."""
    theta = theta_ext / 1.6
    for _ in range(80):
        n = indicatrix.offset_index(species, lambda_nm, theta_p, phi_p, phi_s, theta, branch)
        new = math.asin(min(1.0, math.sin(theta_ext) / n))
        if abs(new - theta) < 1e-15:
            return new, indicatrix.offset_index(
                species, lambda_nm, theta_p, phi_p, phi_s, new, branch
            )
        theta = new
    return theta, indicatrix.offset_index(
        species, lambda_nm, theta_p, phi_p, phi_s, theta, branch
    )


def pair_spectrum(
    pump: PumpConfig,
    collection: CollectionMode,
    crystal_length_mm: float,
    grid: np.ndarray = DEFAULT_GRID,
) -> SpectrumCurve:
    """Pair rate at the collection mode vs signal frequency offset.

    The signal is pinned to the mode axis at (theta_ext, phi); the idler goes
    where transverse momentum conservation sends it, at azimuth phi + pi. The
    rate is sinc^2 of the residual longitudinal mismatch over the crystal
    length, times a Gaussian penalty for the idler's exterior-angle miss of
    the idler mode axis (mirror of the signal axis through the pump).
    """
    grid = np.asarray(grid, dtype=float)
    _check_symmetric(grid)
    sp = pump.species
    tp, pp, phi = pump.theta_p, pump.phi_p, collection.phi
    omega0 = TWO_PI * C_M_PER_S / (2.0 * pump.lambda_p_nm * 1e-9)
    length_m = crystal_length_mm * 1e-3
    k_p = TWO_PI * pump.pump_index() / (pump.lambda_p_nm * 1e-9)

    values = np.zeros_like(grid)
    for j, dw in enumerate(grid):
        lam_s = TWO_PI * C_M_PER_S / (omega0 + dw) * 1e9
        lam_i = idler_wavelength_nm(pump.lambda_p_nm, lam_s)
        theta_s, n_s = _snell_invert(
            sp, lam_s, tp, pp, phi, collection.theta_ext, pump.daughter_branch
        )
        k_s = TWO_PI * n_s / (lam_s * 1e-9)
        # idler polar angle from k_i sin(theta_i) = k_s sin(theta_s)
        trans = k_s * math.sin(theta_s)
        theta_i = theta_s
        n_i = n_s
        for _ in range(80):
            n_i = indicatrix.offset_index(sp, lam_i, tp, pp, phi, -theta_i,
                                          pump.daughter_branch)
            arg = trans * (lam_i * 1e-9) / (TWO_PI * n_i)
            if abs(arg) > 1.0:
                n_i = float("nan")
                break
            new = math.asin(arg)
            if abs(new - theta_i) < 1e-15:
                theta_i = new
                break
            theta_i = new
        if not math.isfinite(n_i):
            values[j] = 0.0
            continue
        k_i = TWO_PI * n_i / (lam_i * 1e-9)
        dk_z = k_p - k_s * math.cos(theta_s) - k_i * math.cos(theta_i)
        body = np.sinc(dk_z * length_m / 2.0 / math.pi) ** 2
        sin_ext = n_i * math.sin(theta_i)
        if abs(sin_ext) > 1.0:
            values[j] = 0.0
            continue
        miss = math.asin(sin_ext) - collection.theta_ext
        div = collection.divergence(lam_i)
        values[j] = body * math.exp(-(miss / div) ** 2)
    return SpectrumCurve(grid=grid, values=values)


def overlap_integral(s1: SpectrumCurve, s2: SpectrumCurve) -> float:
    """Bhattacharyya coefficient of the two area-normalized spectra."""
    if s1.grid.shape != s2.grid.shape or not np.allclose(s1.grid, s2.grid):
        raise ValueError("spectra must share the same frequency grid")
    a1, a2 = s1.area(), s2.area()
    if a1 <= 0 or a2 <= 0:
        raise GeometryError("zero-area spectrum: overlap undefined")
    integrand = np.sqrt((s1.values / a1) * (s2.values / a2))
    return float(np.trapz(integrand, s1.grid))


def joint_rate(s: SpectrumCurve, band_nm: float, lambda_0_nm: float = 810.0) -> float:
    """Integrated rate over a wavelength band centred on degeneracy."""
    half = math.pi * C_M_PER_S * (band_nm * 1e-9) / (lambda_0_nm * 1e-9) ** 2
    if half > s.grid[-1] or -half < s.grid[0]:
        warnings.warn(
            "integration band exceeds the spectrum grid; truncating",
            stacklevel=2,
        )
    mask = (s.grid >= -half) & (s.grid <= half)
    return float(np.trapz(s.values[mask], s.grid[mask]))


@dataclass(frozen=True)
class SandwichSpectra:
    """Both crystals' spectra at one midpoint collection azimuth."""

    crystal_1: SpectrumCurve
    crystal_2: SpectrumCurve
    collection: CollectionMode

    def overlap(self) -> OverlapResult:
        return OverlapResult(
            overlap=overlap_integral(self.crystal_1, self.crystal_2),
            rate_1=self.crystal_1.area(),
            rate_2=self.crystal_2.area(),
            collection=self.collection,
        )


def sandwich_spectra(
    pump: PumpConfig,
    trace: RingTrace,
    phi: float,
    waist_um: float,
    crystal_length_mm: float,
    grid: np.ndarray = DEFAULT_GRID,
) -> SandwichSpectra:
    """Spectra from both sandwich crystals collected at one azimuth.

    The second crystal's ring is the first rotated 90 deg, so its exterior
    radius and spectrum at phi are the first crystal's at phi + 90 deg; the
    midpoint mode bisects the two exterior angles.
    """
    e1 = trace.interpolate_ext(phi)
    e2 = trace.interpolate_ext(phi + math.pi / 2.0)
    collection = CollectionMode(
        theta_ext=0.5 * (e1 + e2), phi=phi, waist_um=waist_um
    )
    s1 = pair_spectrum(pump, collection, crystal_length_mm, grid)
    rotated = CollectionMode(
        theta_ext=collection.theta_ext, phi=phi + math.pi / 2.0, waist_um=waist_um
    )
    s2 = pair_spectrum(pump, rotated, crystal_length_mm, grid)
    return SandwichSpectra(crystal_1=s1, crystal_2=s2, collection=collection)
