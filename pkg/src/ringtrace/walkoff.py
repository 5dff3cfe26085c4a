"""Poynting-vector walk-off and the ring as it appears on the exit face.

The wave normal sets the phase-matching geometry, but the energy of each
daughter travels along its Poynting vector, which in an anisotropic crystal
tilts away from the wave normal by the walk-off angle. Propagating each ring
sample through the crystal along its Poynting vector gives the ring actually
drawn on the exit face, which differs slightly in shape from the pure
wave-normal ring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dispersion import CrystalSpecies
from .errors import GeometryError
from .indicatrix import wave_normal_indices, FAST, SLOW
from .phasematch import RingTrace, idler_wavelength_nm


def poynting_direction(
    species: CrystalSpecies, lambda_nm: float, s_crystal: np.ndarray, branch: str
) -> np.ndarray:
    """Unit Poynting vector for the given wave normal (crystal frame).

    The electric field solves (n^2 (s s^T - I) + eps) E = 0; the energy flow
    then follows S ~ E x H ~ s (E.E) - E (s.E), which tilts off the wave
    normal toward lower index.
    """
    s = np.asarray(s_crystal, dtype=float)
    s = s / np.linalg.norm(s)
    nx, ny, nz = species.principal_indices(lambda_nm)
    eps = np.diag([nx * nx, ny * ny, nz * nz])
    n_fast, n_slow = wave_normal_indices((nx, ny, nz), s)
    n = n_fast if branch == FAST else n_slow
    m = n * n * (np.outer(s, s) - np.eye(3)) + eps
    w, v = np.linalg.eigh(m)
    e = v[:, int(np.argmin(np.abs(w)))]
    p = s * float(e @ e) - e * float(s @ e)
    norm = np.linalg.norm(p)
    if norm < 1e-14:
        raise GeometryError("degenerate Poynting direction (optic-axis point)")
    p = p / norm
    if float(p @ s) < 0:
        p = -p
    return p


def walkoff_angle(
    species: CrystalSpecies, lambda_nm: float, s_crystal: np.ndarray, branch: str
) -> float:
    p = poynting_direction(species, lambda_nm, s_crystal, branch)
    s = np.asarray(s_crystal, dtype=float)
    s = s / np.linalg.norm(s)
    return math.acos(min(1.0, max(-1.0, float(p @ s))))


@dataclass(frozen=True)
class WalkoffSample:
    phi_s: float
    rho_s: float  # signal walk-off angle, radians
    rho_i: float
    poynting_s: tuple[float, float, float]  # crystal frame
    poynting_i: tuple[float, float, float]


def _to_crystal(frame, theta: float, phi: float) -> np.ndarray:
    xp, yp, zp = frame
    t_hat = math.cos(phi) * xp + math.sin(phi) * yp
    return math.sin(theta) * t_hat + math.cos(theta) * zp


def walkoff_ring(trace: RingTrace) -> list[WalkoffSample]:
    pump = trace.pump
    frame = pump.frame()
    lambda_i = idler_wavelength_nm(pump.lambda_p_nm, trace.lambda_s_nm)
    out = []
    for sol in trace.samples:
        s_s = _to_crystal(frame, sol.theta_s, sol.phi_s)
        s_i = _to_crystal(frame, sol.theta_i, sol.phi_i)
        p_s = poynting_direction(
            pump.species, trace.lambda_s_nm, s_s, pump.daughter_branch
        )
        p_i = poynting_direction(pump.species, lambda_i, s_i, pump.daughter_branch)
        rho_s = math.acos(min(1.0, max(-1.0, float(p_s @ s_s))))
        rho_i = math.acos(min(1.0, max(-1.0, float(p_i @ s_i))))
        out.append(
            WalkoffSample(
                phi_s=sol.phi_s,
                rho_s=rho_s,
                rho_i=rho_i,
                poynting_s=tuple(p_s),
                poynting_i=tuple(p_i),
            )
        )
    return out


@dataclass(frozen=True)
class ExitFaceRings:
    """Wave-normal vs Poynting-propagated ring shapes at the exit face.

    Displacements are per unit crystal thickness, resolved on the pump-local
    transverse axes, with the common-mode walk-off shift of the ring centre
    removed before forming the semi-axes.
    """

    ecc_wave_normal: float
    ecc_poynting: float
    semi_wave: tuple[float, float]      # (phi = 0/180 axis, phi = 90/270 axis)
    semi_poynting: tuple[float, float]
    center_wave: tuple[float, float]
    center_poynting: tuple[float, float]

    @property
    def relative_difference(self) -> float:
        return abs(self.ecc_poynting - self.ecc_wave_normal) / self.ecc_wave_normal


def exit_face_comparison(trace: RingTrace) -> ExitFaceRings:
    """Compare ring eccentricity with and without Poynting walk-off.

    Both rings are built from signed transverse displacements at the cardinal
    azimuths; each semi-axis is half the difference of the opposite-point
    displacements, so the walk-off shift of the centre cancels.
    """
    pump = trace.pump
    frame = pump.frame()
    xp, yp, zp = frame

    def nearest(phi):
        return min(
            trace.samples,
            key=lambda s: min(
                abs(s.phi_s - phi),
                abs(s.phi_s - phi - 2 * math.pi),
                abs(s.phi_s - phi + 2 * math.pi),
            ),
        )

    sols = [nearest(phi) for phi in (0.0, math.pi / 2, math.pi, 1.5 * math.pi)]

    def project(v):
        dz = float(v @ zp)
        if dz <= 0:
            raise GeometryError("ray does not cross the slab")
        return float(v @ xp) / dz, float(v @ yp) / dz

    def ring(poynting: bool):
        pts = []
        for sol in sols:
            s_s = _to_crystal(frame, sol.theta_s, sol.phi_s)
            d = (
                poynting_direction(
                    pump.species, trace.lambda_s_nm, s_s, pump.daughter_branch
                )
                if poynting
                else s_s
            )
            pts.append(project(d))
        a = 0.5 * abs(pts[0][0] - pts[2][0])
        b = 0.5 * abs(pts[1][1] - pts[3][1])
        center = (0.5 * (pts[0][0] + pts[2][0]), 0.5 * (pts[1][1] + pts[3][1]))
        r = min(a, b) / max(a, b)
        return math.sqrt(max(0.0, 1.0 - r * r)), (a, b), center

    ecc_w, semi_w, c_w = ring(poynting=False)
    ecc_p, semi_p, c_p = ring(poynting=True)
    return ExitFaceRings(
        ecc_wave_normal=ecc_w,
        ecc_poynting=ecc_p,
        semi_wave=semi_w,
        semi_poynting=semi_p,
        center_wave=c_w,
        center_poynting=c_p,
    )
