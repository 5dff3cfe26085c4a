"""Direction-dependent refractive indices from Fresnel's wave-normal equation.

The two indices for a propagation direction s in the crystal principal frame
are the roots of a quadratic in u = 1/n^2 obtained by clearing denominators:

    s_x^2 (u - u_y)(u - u_z) + s_y^2 (u - u_x)(u - u_z)
                             + s_z^2 (u - u_x)(u - u_y) = 0,

with u_k = 1/n_k^2. The cleared form is regular at principal directions where
the rational form degenerates, so it is used everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dispersion import CrystalSpecies
from .errors import GeometryError, RingtraceError

FAST = "fast"
SLOW = "slow"


@dataclass(frozen=True)
class WaveDirection:
    """Propagation direction as polar angles, radians.

    theta is measured from the frame z-axis, phi from the frame x-axis.
    frame is "crystal-principal" or "pump-local".
    """

    theta: float
    phi: float
    frame: str = "crystal-principal"

    def unit_vector(self) -> np.ndarray:
        st = math.sin(self.theta)
        return np.array(
            [st * math.cos(self.phi), st * math.sin(self.phi), math.cos(self.theta)]
        )


@dataclass(frozen=True)
class BranchIndex:
    branch: str
    n: float
    direction: WaveDirection
    wavelength_nm: float


def wave_normal_indices(
    principal: tuple[float, float, float], s: np.ndarray
) -> tuple[float, float]:
    """The (n_fast, n_slow) pair for unit direction s."""
    nx, ny, nz = principal
    if not all(math.isfinite(v) and v > 0 for v in (nx, ny, nz)):
        raise RingtraceError(f"non-physical principal indices {principal}")
    if not np.all(np.isfinite(s)):
        raise RingtraceError(f"non-finite direction {s}")
    ux, uy, uz = nx ** -2, ny ** -2, nz ** -2
    norm2 = float(s[0] * s[0] + s[1] * s[1] + s[2] * s[2])
    if norm2 <= 0.0:
        raise RingtraceError(f"zero direction vector {s}")
    sx2, sy2, sz2 = s[0] * s[0] / norm2, s[1] * s[1] / norm2, s[2] * s[2] / norm2
    b = -(sx2 * (uy + uz) + sy2 * (ux + uz) + sz2 * (ux + uy))
    c = sx2 * uy * uz + sy2 * ux * uz + sz2 * ux * uy
    # b^2 - 4c rewritten to avoid cancellation between near-degenerate roots
    # (exact square in the uniaxial limit); degenerate only at an optic axis
    t1 = sx2 * (uy - uz)
    t2 = sy2 * (uz - ux)
    t3 = sz2 * (ux - uy)
    disc = (t1 - t2 + t3) ** 2 - 4.0 * t1 * t3
    if disc < 0.0:  # roundoff at an optic axis
        disc = 0.0
    root = math.sqrt(disc)
    u_hi = 0.5 * (-b + root)  # larger u -> smaller n -> fast branch
    u_lo = 0.5 * (-b - root)
    return 1.0 / math.sqrt(u_hi), 1.0 / math.sqrt(u_lo)


def fresnel_residual(principal: tuple[float, float, float], s: np.ndarray, n: float) -> float:
    """Cleared-form residual of the wave-normal equation; ~0 for a true root."""
    nx, ny, nz = principal
    ux, uy, uz = nx ** -2, ny ** -2, nz ** -2
    u = n ** -2
    return (
        s[0] ** 2 * (u - uy) * (u - uz)
        + s[1] ** 2 * (u - ux) * (u - uz)
        + s[2] ** 2 * (u - ux) * (u - uy)
    )


def branch_index(
    species: CrystalSpecies,
    wavelength_nm: float,
    direction: WaveDirection,
    branch: str,
) -> BranchIndex:
    """Fast or slow index for a direction in the crystal principal frame."""
    if direction.frame != "crystal-principal":
        raise RingtraceError("branch_index expects a crystal-principal direction")
    if branch not in (FAST, SLOW):
        raise RingtraceError(f"branch must be 'fast' or 'slow', got {branch!r}")
    principal = species.principal_indices(wavelength_nm)
    n_fast, n_slow = wave_normal_indices(principal, direction.unit_vector())
    return BranchIndex(
        branch=branch,
        n=n_fast if branch == FAST else n_slow,
        direction=direction,
        wavelength_nm=wavelength_nm,
    )


def _index_for(species, wavelength_nm, vec, branch) -> float:
    principal = species.principal_indices(wavelength_nm)
    n_fast, n_slow = wave_normal_indices(principal, vec)
    return n_fast if branch == FAST else n_slow


def pump_frame(theta_p: float, phi_p: float):
    """Pump-local orthonormal triad (x', y', z') in crystal coordinates.

    z' lies along the pump wavevector. x' is the unit vector perpendicular to
    z' in the plane spanned by the pump and the crystal z-axis, oriented away
    from the crystal z-axis; y' = z' x x'. Signal azimuths phi_s are measured
    from x'.
    """
    zp = WaveDirection(theta_p, phi_p).unit_vector()
    zc = np.array([0.0, 0.0, 1.0])
    xp = zp * np.dot(zc, zp) - zc
    norm = np.linalg.norm(xp)
    if norm < 1e-12:
        raise GeometryError("pump along the crystal z-axis: pump frame undefined")
    xp = xp / norm
    yp = np.cross(zp, xp)
    return xp, yp, zp


def offset_direction(theta_p, phi_p, phi_s, t) -> np.ndarray:
    """Unit vector tilted by signed polar offset t along azimuth phi_s.

    Negative t means the same tilt magnitude at azimuth phi_s + pi, so the
    result is a smooth function of t along a fixed great circle through the
    pump direction.
    """
    xp, yp, zp = pump_frame(theta_p, phi_p)
    t_hat = math.cos(phi_s) * xp + math.sin(phi_s) * yp
    return math.sin(t) * t_hat + math.cos(t) * zp


def offset_index(species, wavelength_nm, theta_p, phi_p, phi_s, t, branch=SLOW) -> float:
    """Branch index at a signed pump-local offset; the function the small-angle
    expansion differentiates."""
    return _index_for(
        species, wavelength_nm, offset_direction(theta_p, phi_p, phi_s, t), branch
    )


@dataclass(frozen=True)
class IndexDerivatives:
    """Finite-difference derivatives of the branch index at (theta_p, t=0)."""

    n0: float
    d_theta_p: float
    d_theta_s: float
    d2_theta_p: float
    d2_theta_s: float
    d2_mixed: float


def index_derivatives(
    species: CrystalSpecies,
    wavelength_nm: float,
    theta_p: float,
    phi_p: float,
    phi_s: float,
    branch: str = SLOW,
    h1: float = 1e-4,
    h2: float = 1e-3,
) -> IndexDerivatives:
    """Central finite differences of the index around the collinear point.

    h1 is the first-derivative step, h2 the second-derivative step (radians).
    """

    def f(dp, t):
        v = offset_index(species, wavelength_nm, theta_p + dp, phi_p, phi_s, t, branch)
        if not math.isfinite(v):
            raise GeometryError(
                "index evaluation hit a principal-axis singularity; "
                "use a smaller finite-difference step"
            )
        return v

    n0 = f(0.0, 0.0)
    d1p = (f(h1, 0.0) - f(-h1, 0.0)) / (2.0 * h1)
    d1s = (f(0.0, h1) - f(0.0, -h1)) / (2.0 * h1)
    d2p = (f(h2, 0.0) - 2.0 * n0 + f(-h2, 0.0)) / (h2 * h2)
    d2s = (f(0.0, h2) - 2.0 * n0 + f(0.0, -h2)) / (h2 * h2)
    d2m = (f(h2, h2) - f(h2, -h2) - f(-h2, h2) + f(-h2, -h2)) / (4.0 * h2 * h2)
    return IndexDerivatives(
        n0=n0, d_theta_p=d1p, d_theta_s=d1s, d2_theta_p=d2p, d2_theta_s=d2s, d2_mixed=d2m
    )


def pump_index_derivatives(
    species: CrystalSpecies,
    wavelength_nm: float,
    theta_p: float,
    phi_p: float,
    branch: str = FAST,
    h1: float = 1e-4,
    h2: float = 1e-3,
):
    """(n, dn/dtheta_p, d2n/dtheta_p^2) of the pump-branch index along the pump."""

    def g(dp):
        vec = WaveDirection(theta_p + dp, phi_p).unit_vector()
        return _index_for(species, wavelength_nm, vec, branch)

    n0 = g(0.0)
    d1 = (g(h1) - g(-h1)) / (2.0 * h1)
    d2 = (g(h2) - 2.0 * n0 + g(-h2)) / (h2 * h2)
    return n0, d1, d2
