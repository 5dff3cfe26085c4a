"""Second-order small-angle model of the degenerate down-conversion ring.

The daughter indices are expanded to second order around the collinear
degenerate configuration (pump at the collinear phase-matching angle
theta_p0 with both daughters along the pump). Solving the expanded
longitudinal and transverse phase-matching equations gives the ring's
internal semi-angles at phi_s = 0, 90 and 180 deg, and from those the ring
eccentricity, its three-term derivative decomposition, and the wavelength of
minimum eccentricity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .dispersion import CrystalSpecies
from .errors import NoSolutionError
from . import indicatrix
from .indicatrix import FAST, SLOW, IndexDerivatives
from .phasematch import refract_external


def collinear_pump_angle(
    species: CrystalSpecies,
    phi_p: float,
    lambda_p_nm: float,
    near: float | None = None,
    pump_branch: str = FAST,
    daughter_branch: str = SLOW,
    scan_step: float = math.radians(0.25),
) -> float:
    """Pump angle where the collinear degenerate ring closes.

    Root of n_daughter(2 lambda_p, pump direction) = n_pump(lambda_p, pump
    direction) over theta_p. The index surfaces are mirror symmetric in the
    principal planes, so two roots usually exist; `near` selects the one
    closest to a nominal cut angle.
    """
    lambda_d = 2.0 * lambda_p_nm

    def g(theta_p):
        n_d = indicatrix.offset_index(
            species, lambda_d, theta_p, phi_p, 0.0, 0.0, daughter_branch
        )
        n_p = indicatrix.offset_index(
            species, lambda_p_nm, theta_p, phi_p, 0.0, 0.0, pump_branch
        )
        return n_d - n_p

    if near is not None:
        lo = max(math.radians(0.5), near - math.radians(5.0))
        hi = min(math.radians(179.5), near + math.radians(5.0))
    else:
        lo, hi = math.radians(0.5), math.radians(179.5)
    grid = np.arange(lo, hi, scan_step)
    vals = [g(t) for t in grid]
    roots = []
    for i in range(len(grid) - 1):
        if vals[i] == 0.0:
            roots.append(float(grid[i]))
        elif vals[i] * vals[i + 1] < 0:
            roots.append(brentq(g, grid[i], grid[i + 1], xtol=1e-14))
    if not roots:
        raise NoSolutionError(
            f"no collinear phase-matching angle in "
            f"({math.degrees(lo):.1f}, {math.degrees(hi):.1f}) deg for phi_p = "
            f"{math.degrees(phi_p):.1f} deg at pump {lambda_p_nm} nm"
        )
    if near is None:
        return roots[0]
    return min(roots, key=lambda r: abs(r - near))


@dataclass(frozen=True)
class ExpansionPoint:
    """Collinear degenerate expansion data for one crystal configuration."""

    species: CrystalSpecies
    phi_p: float
    theta_p0: float
    delta_theta_p: float
    lambda_nm: float  # degenerate daughter wavelength
    n_tilde_s: float  # collinear daughter index
    n_tilde_p: float  # pump index at theta_p0
    pump_d1: float
    pump_d2: float
    derivs_0: IndexDerivatives   # daughter derivatives, offsets along phi_s = 0
    derivs_90: IndexDerivatives  # same along phi_s = 90 deg

    @property
    def theta_p(self) -> float:
        return self.theta_p0 + self.delta_theta_p

    def pump_index_detuned(self) -> float:
        d = self.delta_theta_p
        return self.n_tilde_p + self.pump_d1 * d + 0.5 * self.pump_d2 * d * d


def make_expansion_point(
    species: CrystalSpecies,
    phi_p: float,
    theta_p: float,
    lambda_p_nm: float,
    theta_p0: float | None = None,
) -> ExpansionPoint:
    if theta_p0 is None:
        theta_p0 = collinear_pump_angle(species, phi_p, lambda_p_nm, near=theta_p)
    lam = 2.0 * lambda_p_nm
    d0 = indicatrix.index_derivatives(species, lam, theta_p0, phi_p, 0.0, SLOW)
    d90 = indicatrix.index_derivatives(species, lam, theta_p0, phi_p, math.pi / 2, SLOW)
    n_p, p1, p2 = indicatrix.pump_index_derivatives(
        species, lambda_p_nm, theta_p0, phi_p, FAST
    )
    return ExpansionPoint(
        species=species,
        phi_p=phi_p,
        theta_p0=theta_p0,
        delta_theta_p=theta_p - theta_p0,
        lambda_nm=lam,
        n_tilde_s=d0.n0,
        n_tilde_p=n_p,
        pump_d1=p1,
        pump_d2=p2,
        derivs_0=d0,
        derivs_90=d90,
    )


@dataclass(frozen=True)
class ExpansionEmission:
    """Internal ring semi-angles from the expanded phase-matching system."""

    theta_90: float  # theta_s at phi_s = 90 deg
    theta_0: float   # theta_s at phi_s = 0
    theta_180: float

    @property
    def delta_0(self) -> float:
        return self.theta_0 - self.theta_90

    @property
    def delta_180(self) -> float:
        return self.theta_180 - self.theta_90


def _expanded_index(dv: IndexDerivatives, delta_p: float):
    """Second-order daughter index as a function of the signed offset t."""
    base = dv.n0 + dv.d_theta_p * delta_p + 0.5 * dv.d2_theta_p * delta_p ** 2
    slope = dv.d_theta_s + dv.d2_mixed * delta_p
    curve = 0.5 * dv.d2_theta_s

    def n_of(t):
        return base + slope * t + curve * t * t

    return n_of, base, slope


def emission_from_expansion(point: ExpansionPoint) -> ExpansionEmission:
    """Solve the expanded longitudinal + transverse system.

    At phi_s = 90 deg the mirror symmetry of a principal-plane pump makes the
    signal and idler angles equal and the system closes in quadrature; the
    phi_s = 0 solve then warm-starts from that angle. Signal at phi_s = 0 and
    idler at phi_s = 180 deg come from the same solve.
    """
    dp = point.delta_theta_p
    n_pump = point.pump_index_detuned()

    n90, base90, _ = _expanded_index(point.derivs_90, dp)
    # n(t) (1 - t^2/2) symmetric pair: base - t^2 (base - d2_theta_s) / 2 = n_pump
    denom = base90 - point.derivs_90.d2_theta_s
    t2 = 2.0 * (base90 - n_pump) / denom
    if t2 <= 0.0:
        raise NoSolutionError(
            f"no ring at this detuning (delta_theta_p = "
            f"{math.degrees(dp):.4f} deg, lambda = {point.lambda_nm:.1f} nm)"
        )
    theta_90 = math.sqrt(t2)

    n0_of, _, _ = _expanded_index(point.derivs_0, dp)

    def eqs(x):
        ths, thi = x
        ns = n0_of(ths)
        ni = n0_of(-thi)
        return np.array(
            [
                ns * (1.0 - 0.5 * ths * ths)
                + ni * (1.0 - 0.5 * thi * thi)
                - 2.0 * n_pump,
                ns * ths - ni * thi,
            ]
        )

    x = np.array([theta_90, theta_90])
    for _ in range(60):
        f = eqs(x)
        if max(abs(f[0]), abs(f[1])) < 1e-15:
            break
        h = 1e-9
        jac = np.empty((2, 2))
        for j in range(2):
            xe = x.copy()
            xe[j] += h
            jac[:, j] = (eqs(xe) - f) / h
        x = x + np.linalg.solve(jac, -f)
    if x[0] <= 0.0 or x[1] <= 0.0 or not np.all(np.isfinite(x)):
        raise NoSolutionError(
            f"expanded system has no positive root at delta_theta_p = "
            f"{math.degrees(dp):.4f} deg"
        )
    return ExpansionEmission(theta_90=theta_90, theta_0=float(x[0]), theta_180=float(x[1]))


@dataclass(frozen=True)
class EccEstimate:
    internal: float  # from internal angles (the in-crystal eccentricity)
    external: float  # after Snell refraction with the local daughter index
    emission: ExpansionEmission


def eccentricity_estimate(point: ExpansionPoint) -> EccEstimate:
    """Ring eccentricity from the expansion.

    The internal value uses the ratio of the internal semi-axes
    (theta_0 + theta_180) / (2 theta_90); the external value refracts each
    angle through the exit face with the direction-dependent daughter index.
    """
    em = emission_from_expansion(point)

    def ecc(minor_like, major_like):
        r = minor_like / major_like
        if r > 1.0:
            r = 1.0 / r
        return math.sqrt(max(0.0, 1.0 - r * r))

    internal = ecc(em.theta_0 + em.theta_180, 2.0 * em.theta_90)

    sp, lam, tp, pp = point.species, point.lambda_nm, point.theta_p, point.phi_p
    n_at = lambda phi_s, t: indicatrix.offset_index(sp, lam, tp, pp, phi_s, t, SLOW)
    e0 = refract_external(n_at(0.0, em.theta_0), em.theta_0)
    e180 = refract_external(n_at(0.0, -em.theta_180), em.theta_180)
    e90 = refract_external(n_at(math.pi / 2, em.theta_90), em.theta_90)
    external = ecc(math.tan(e0) + math.tan(e180), 2.0 * math.tan(e90))
    return EccEstimate(internal=internal, external=external, emission=em)


@dataclass(frozen=True)
class EccTerms:
    """The three derivative terms of the eccentricity decomposition.

    term1 and term2 are the daughter-index curvatures along the phi_s = 0 and
    90 deg offsets; term3 is the squared-slope term 2/n (dn/dtheta_s)^2 at
    phi_s = 0. The combination term1 - term2 - term3 changes sign where the
    ring's internal minor and major axes swap, i.e. at the eccentricity
    minimum; its absolute scale is a diagnostic, not a calibrated epsilon.
    """

    term1: float
    term2: float
    term3: float
    estimate: float


def eccentricity_terms(point: ExpansionPoint) -> EccTerms:
    t1 = point.derivs_0.d2_theta_s
    t2 = point.derivs_90.d2_theta_s
    t3 = 2.0 / point.n_tilde_s * point.derivs_0.d_theta_s ** 2
    return EccTerms(term1=t1, term2=t2, term3=t3, estimate=t1 - t2 - t3)


def term_crossing_wavelength(
    species: CrystalSpecies,
    phi_p: float,
    bracket_nm: tuple[float, float],
    theta_p0_near: float,
) -> float:
    """Wavelength where term1 = term2, with each point evaluated at its own
    collinear configuration."""
    # theta_p0 moves by tens of degrees over a wide bracket, so walk the grid
    # from the hi edge (where theta_p0_near applies) with continuation
    near = theta_p0_near

    def diff(lam):
        nonlocal near
        tp0 = collinear_pump_angle(species, phi_p, lam / 2.0, near=near)
        near = tp0
        t = eccentricity_terms(
            make_expansion_point(species, phi_p, tp0, lam / 2.0, theta_p0=tp0)
        )
        return t.term1 - t.term2

    lo, hi = bracket_nm
    grid = np.linspace(hi, lo, 41)
    vals = [diff(l) for l in grid]
    for i in range(len(grid) - 1):
        if vals[i] * vals[i + 1] < 0:
            return brentq(diff, grid[i + 1], grid[i], xtol=1e-6)
    raise NoSolutionError(
        f"term1 - term2 does not change sign over [{lo}, {hi}] nm"
    )


def _golden_section(f, lo, hi, tol):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


@dataclass(frozen=True)
class MinEccResult:
    lambda_star_nm: float
    ecc_at_min: float
    bracket_nm: tuple[float, float]
    theta_p: float
    at_edge: bool


def min_eccentricity_wavelength(
    species: CrystalSpecies,
    phi_p: float,
    theta_p: float,
    bracket_nm: tuple[float, float] = (700.0, 800.0),
    anchor_nm: float = 810.0,
    coarse_step_nm: float = 2.0,
    tol_nm: float = 0.01,
) -> MinEccResult:
    """Degenerate wavelength minimizing the internal ring eccentricity.

    The sweep retunes the pump to lambda/2 at every point. The pump tilt is
    interpreted as a detuning from the collinear angle: theta_p fixes
    delta = theta_p - theta_p0(anchor_nm), and each sweep wavelength is
    evaluated at theta_p0(lambda) + delta, which keeps the ring open across
    the bracket (a literally fixed theta_p closes the ring a fraction of a
    degree from the anchor).
    """
    tp0_anchor = collinear_pump_angle(species, phi_p, anchor_nm / 2.0, near=theta_p)
    delta = theta_p - tp0_anchor

    tp0_cache: dict[float, float] = {round(anchor_nm, 6): tp0_anchor}

    def theta_p0_at(lam):
        key = round(lam, 6)
        if key not in tp0_cache:
            # continuation from the nearest cached wavelength
            near_lam = min(tp0_cache, key=lambda k: abs(k - lam))
            step = 10.0 if lam < near_lam else -10.0
            cur = near_lam
            while abs(cur - lam) > 10.0:
                cur -= step
                ck = round(cur, 6)
                if ck not in tp0_cache:
                    tp0_cache[ck] = collinear_pump_angle(
                        species, phi_p, cur / 2.0,
                        near=tp0_cache[min(tp0_cache, key=lambda k: abs(k - cur))],
                    )
            tp0_cache[key] = collinear_pump_angle(
                species, phi_p, lam / 2.0,
                near=tp0_cache[min(tp0_cache, key=lambda k: abs(k - lam))],
            )
        return tp0_cache[key]

    def ecc(lam):
        tp0 = theta_p0_at(lam)
        point = make_expansion_point(
            species, phi_p, tp0 + delta, lam / 2.0, theta_p0=tp0
        )
        return eccentricity_estimate(point).internal

    lo, hi = bracket_nm
    coarse = np.arange(lo, hi + 0.5 * coarse_step_nm, coarse_step_nm)
    vals = [ecc(l) for l in coarse]
    k = int(np.argmin(vals))
    if k == 0 or k == len(coarse) - 1:
        return MinEccResult(
            lambda_star_nm=float(coarse[k]),
            ecc_at_min=float(vals[k]),
            bracket_nm=bracket_nm,
            theta_p=theta_p,
            at_edge=True,
        )
    lam_star, ecc_star = _golden_section(ecc, coarse[k - 1], coarse[k + 1], tol_nm)
    return MinEccResult(
        lambda_star_nm=float(lam_star),
        ecc_at_min=float(ecc_star),
        bracket_nm=bracket_nm,
        theta_p=theta_p,
        at_edge=False,
    )
