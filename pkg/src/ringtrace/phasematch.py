"""Momentum-conservation solver: emission angles, ring traces, eccentricity.

All angles are radians internally. The pump-local frame comes from
indicatrix.pump_frame; the signal sits at azimuth phi_s, the idler at
phi_s + pi, and energy conservation fixes the idler wavelength exactly in
frequency space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dispersion import CrystalSpecies
from .errors import ConvergenceError, GeometryError, NoSolutionError
from . import indicatrix
from .indicatrix import FAST, SLOW

TWO_PI = 2.0 * math.pi

RESIDUAL_TOL = 1e-9  # |dk|/|k_p| acceptance threshold for a converged solution
_NEWTON_CAP = 100


def idler_wavelength_nm(lambda_p_nm: float, lambda_s_nm: float) -> float:
    """Energy conservation omega_p = omega_s + omega_i, exact in frequency."""
    inv = 1.0 / lambda_p_nm - 1.0 / lambda_s_nm
    if inv <= 0.0:
        raise NoSolutionError(
            f"signal at {lambda_s_nm} nm carries more energy than the "
            f"{lambda_p_nm} nm pump"
        )
    return 1.0 / inv


@dataclass(frozen=True)
class PumpConfig:
    species: CrystalSpecies
    lambda_p_nm: float
    theta_p: float
    phi_p: float
    pump_branch: str = FAST
    daughter_branch: str = SLOW

    def frame(self):
        return indicatrix.pump_frame(self.theta_p, self.phi_p)

    def pump_index(self) -> float:
        vec = indicatrix.WaveDirection(self.theta_p, self.phi_p).unit_vector()
        return indicatrix._index_for(
            self.species, self.lambda_p_nm, vec, self.pump_branch
        )


@dataclass(frozen=True)
class PhaseMatchSolution:
    phi_s: float
    theta_s: float
    theta_i: float
    n_s: float
    n_i: float
    theta_s_ext: float
    theta_i_ext: float
    residual: float

    @property
    def phi_i(self) -> float:
        return (self.phi_s + math.pi) % TWO_PI


@dataclass(frozen=True)
class RingTrace:
    pump: PumpConfig
    lambda_s_nm: float
    samples: tuple[PhaseMatchSolution, ...]

    @property
    def n_samples(self) -> int:
        return len(self.samples)

    def sample_at(self, phi_s: float, tol: float = 1e-9) -> PhaseMatchSolution:
        """Exact sample at an azimuth, if the trace contains one."""
        phi = phi_s % TWO_PI
        for s in self.samples:
            if abs(s.phi_s - phi) < tol or abs(abs(s.phi_s - phi) - TWO_PI) < tol:
                return s
        raise NoSolutionError(f"trace has no sample at phi_s = {phi_s} rad")

    def interpolate_ext(self, phi_s: float) -> float:
        """Exterior signal angle at an arbitrary azimuth (linear, periodic)."""
        phis = np.array([s.phi_s for s in self.samples])
        vals = np.array([s.theta_s_ext for s in self.samples])
        phi = phi_s % TWO_PI
        return float(
            np.interp(phi, np.concatenate([phis, [phis[0] + TWO_PI]]),
                      np.concatenate([vals, [vals[0]]]))
        )


def _daughter_index(pump: PumpConfig, lambda_nm: float, vec: np.ndarray) -> float:
    return indicatrix._index_for(pump.species, lambda_nm, vec, pump.daughter_branch)


def mismatch(pump, theta_s, theta_i, phi_s, lambda_s_nm):
    """(dk_x, dk_y, dk_z) in rad/m, pump-local frame, z along the pump."""
    lambda_i_nm = idler_wavelength_nm(pump.lambda_p_nm, lambda_s_nm)
    xp, yp, zp = pump.frame()
    t_hat = math.cos(phi_s) * xp + math.sin(phi_s) * yp
    s_s = math.sin(theta_s) * t_hat + math.cos(theta_s) * zp
    s_i = -math.sin(theta_i) * t_hat + math.cos(theta_i) * zp
    n_s = _daughter_index(pump, lambda_s_nm, s_s)
    n_i = _daughter_index(pump, lambda_i_nm, s_i)
    k_p = TWO_PI * pump.pump_index() / (pump.lambda_p_nm * 1e-9)
    k_s = TWO_PI * n_s / (lambda_s_nm * 1e-9)
    k_i = TWO_PI * n_i / (lambda_i_nm * 1e-9)
    trans = k_s * math.sin(theta_s) - k_i * math.sin(theta_i)
    dk_z = k_p - k_s * math.cos(theta_s) - k_i * math.cos(theta_i)
    return -trans * math.cos(phi_s), -trans * math.sin(phi_s), dk_z


def refract_external(n: float, theta_internal: float) -> float:
    """Snell refraction through the exit face normal to the pump."""
    s = n * math.sin(theta_internal)
    if abs(s) > 1.0:
        raise GeometryError(
            f"total internal reflection: n sin(theta) = {s:.4f} exceeds 1"
        )
    return math.asin(s)


def solve_emission(
    pump: PumpConfig,
    lambda_s_nm: float,
    phi_s: float,
    guess: tuple[float, float] | None = None,
) -> PhaseMatchSolution:
    """Damped Newton solve for (theta_s, theta_i) at one azimuth."""
    lambda_i_nm = idler_wavelength_nm(pump.lambda_p_nm, lambda_s_nm)
    xp, yp, zp = pump.frame()
    t_hat = math.cos(phi_s) * xp + math.sin(phi_s) * yp
    k_p = TWO_PI * pump.pump_index() / (pump.lambda_p_nm * 1e-9)

    def residuals(x):
        ths, thi = x
        s_s = math.sin(ths) * t_hat + math.cos(ths) * zp
        s_i = -math.sin(thi) * t_hat + math.cos(thi) * zp
        n_s = _daughter_index(pump, lambda_s_nm, s_s)
        n_i = _daughter_index(pump, lambda_i_nm, s_i)
        k_s = TWO_PI * n_s / (lambda_s_nm * 1e-9)
        k_i = TWO_PI * n_i / (lambda_i_nm * 1e-9)
        f = np.array(
            [
                (k_p - k_s * math.cos(ths) - k_i * math.cos(thi)) / k_p,
                (k_s * math.sin(ths) - k_i * math.sin(thi)) / k_p,
            ]
        )
        return f, n_s, n_i

    def newton(x0):
        x = np.array(x0, dtype=float)
        best = None
        for _ in range(_NEWTON_CAP):
            f, n_s, n_i = residuals(x)
            res = float(np.hypot(f[0], f[1]))
            if best is None or res < best[0]:
                best = (res, x.copy(), n_s, n_i)
            if res < 1e-12:
                break
            h = 1e-9
            jac = np.empty((2, 2))
            for j in range(2):
                xe = x.copy()
                xe[j] += h
                jac[:, j] = (residuals(xe)[0] - f) / h
            try:
                dx = np.linalg.solve(jac, -f)
            except np.linalg.LinAlgError:
                break
            lam = 1.0
            for _ in range(25):
                f2, _, _ = residuals(x + lam * dx)
                if np.hypot(f2[0], f2[1]) < res:
                    break
                lam *= 0.5
            else:
                break
            x = x + lam * dx
        return best

    guesses = [guess] if guess is not None else []
    guesses += [(g, g) for g in (0.035, 0.01, 0.07, 0.003, 0.12)]
    best = None
    best_pos = None  # converged with both angles positive
    for g in guesses:
        cand = newton(g)
        if cand is None:
            continue
        if best is None or cand[0] < best[0]:
            best = cand
        if cand[0] < RESIDUAL_TOL and cand[1][0] > 0 and cand[1][1] > 0:
            best_pos = cand
            break

    if best_pos is None:
        res = best[0] if best is not None else math.inf
        if res > 1e-6 or best is None:
            raise NoSolutionError(
                f"no phase-matched solution at phi_s = {math.degrees(phi_s):.2f} deg "
                f"(best |dk|/|k_p| = {res:.2e})"
            )
        raise ConvergenceError(
            f"emission solve stalled at phi_s = {math.degrees(phi_s):.2f} deg",
            best_residual=res,
        )
    res, (theta_s, theta_i), n_s, n_i = best_pos
    return PhaseMatchSolution(
        phi_s=phi_s % TWO_PI,
        theta_s=theta_s,
        theta_i=theta_i,
        n_s=n_s,
        n_i=n_i,
        theta_s_ext=refract_external(n_s, theta_s),
        theta_i_ext=refract_external(n_i, theta_i),
        residual=res,
    )


def trace_ring(pump: PumpConfig, lambda_s_nm: float, n_samples: int) -> RingTrace:
    """Solve at uniformly spaced azimuths, warm-starting from the neighbor."""
    if n_samples < 8:
        raise ValueError("n_samples must be >= 8")
    samples = []
    guess = None
    for k in range(n_samples):
        phi = TWO_PI * k / n_samples
        try:
            sol = solve_emission(pump, lambda_s_nm, phi, guess=guess)
        except (NoSolutionError, ConvergenceError) as exc:
            raise type(exc)(
                f"ring trace failed at phi_s = {math.degrees(phi):.3f} deg: {exc}"
            ) from exc
        samples.append(sol)
        guess = (sol.theta_s, sol.theta_i)
    return RingTrace(pump=pump, lambda_s_nm=lambda_s_nm, samples=tuple(samples))


def _tan_ratio_ecc(minor_like: float, major_like: float) -> float:
    r = minor_like / major_like
    if r > 1.0:
        r = 1.0 / r
    return math.sqrt(max(0.0, 1.0 - r * r))


def ring_eccentricity(trace: RingTrace, angles: str = "external") -> float:
    """Eccentricity from the tan-ratio of the phi_s = 0 and 90 deg samples.

    The exponent sign (ratio vs inverse ratio) is chosen so the argument is
    the minor/major ratio. angles = "internal" uses the pre-refraction angles.
    """
    s0 = trace.sample_at(0.0)
    s90 = trace.sample_at(math.pi / 2.0)
    for s in (s0, s90):
        if s.residual >= RESIDUAL_TOL:
            raise ConvergenceError(
                f"non-converged sample at phi_s = {math.degrees(s.phi_s):.1f} deg",
                best_residual=s.residual,
            )
    if angles == "external":
        return _tan_ratio_ecc(math.tan(s0.theta_s_ext), math.tan(s90.theta_s_ext))
    if angles == "internal":
        return _tan_ratio_ecc(math.tan(s0.theta_s), math.tan(s90.theta_s))
    raise ValueError("angles must be 'external' or 'internal'")


def infer_pump_angle(
    species: CrystalSpecies,
    phi_p: float,
    lambda_p_nm: float,
    lambda_s_nm: float,
    target_theta_ext: float,
    at_phi_s: float,
    theta_p_near: float | None = None,
    scan_halfwidth: float = math.radians(3.0),
    pump_branch: str = FAST,
    daughter_branch: str = SLOW,
) -> float:
    """Pump angle whose ring hits a target exterior angle at one azimuth.

    theta_p_near centers the scan window (e.g. the nominal crystal cut);
    without it the whole (0, pi) interval is scanned coarsely first.
    """
    from scipy.optimize import brentq

    def exterior(theta_p):
        pump = PumpConfig(species, lambda_p_nm, theta_p, phi_p,
                          pump_branch, daughter_branch)
        try:
            return solve_emission(pump, lambda_s_nm, at_phi_s).theta_s_ext
        except (NoSolutionError, ConvergenceError):
            return 0.0  # ring closed below the collinear threshold

    def g(theta_p):
        return exterior(theta_p) - target_theta_ext

    if theta_p_near is not None:
        lo = theta_p_near - scan_halfwidth
        hi = theta_p_near + scan_halfwidth
        n_scan = 61
    else:
        lo, hi = math.radians(1.0), math.radians(179.0)
        n_scan = 357
    grid = np.linspace(lo, hi, n_scan)
    vals = [g(t) for t in grid]
    for i in range(len(grid) - 1):
        # only bracket through an open ring, not through the closed-ring zero
        if vals[i] * vals[i + 1] < 0 and (
            exterior(grid[i]) > 0 or exterior(grid[i + 1]) > 0
        ):
            return brentq(g, grid[i], grid[i + 1], xtol=1e-12)
    raise NoSolutionError(
        f"target exterior angle {math.degrees(target_theta_ext):.4f} deg not "
        f"bracketed for theta_p in [{math.degrees(lo):.2f}, {math.degrees(hi):.2f}] deg"
    )
