"""Acceptance gate: one test (and one printed pass/fail line) per criterion.

Run with `pytest -v tests/test_acceptance.py` to get the per-criterion
verdict lines; printed `[criterion N]` lines carry the measured numbers.
"""

import math
import warnings

import numpy as np
import pytest

from ringtrace.dispersion import get_crystal
from ringtrace.imagefit import RingModel, fit_ring, synthesize
from ringtrace.indicatrix import WaveDirection, wave_normal_indices
from ringtrace.phasematch import (
    PumpConfig,
    infer_pump_angle,
    ring_eccentricity,
    solve_emission,
    trace_ring,
)
from ringtrace.smallangle import (
    eccentricity_estimate,
    make_expansion_point,
    min_eccentricity_wavelength,
    term_crossing_wavelength,
)
from ringtrace.spectra import (
    SpectrumCurve,
    joint_rate,
    overlap_integral,
    sandwich_spectra,
)
from ringtrace.walkoff import exit_face_comparison, walkoff_ring

DEG = math.pi / 180.0
BBO = get_crystal("BBO")
BIBO = get_crystal("BiBO")


def _verdict(num, ok, detail):
    line = f"[criterion {num}] {'PASS' if ok else 'FAIL'} — {detail}"
    print(line)
    assert ok, line


def _infer(phi_p_deg, target_deg, at_phi_deg, near_deg):
    return infer_pump_angle(
        BIBO, phi_p_deg * DEG, 405.0, 810.0, target_deg * DEG,
        at_phi_s=at_phi_deg * DEG, theta_p_near=near_deg * DEG,
    )


def test_criterion_1_bbo_ring_circular():
    pump = PumpConfig(BBO, 405.0, 29.392 * DEG, 0.0)
    trace = trace_ring(pump, 810.0, 360)
    ecc = ring_eccentricity(trace)
    exts = np.array([s.theta_s_ext / DEG for s in trace.samples])
    spread = float(exts.max() - exts.min())
    _verdict(
        1,
        ecc <= 0.005 and spread < 1e-4,
        f"BBO ecc = {ecc:.2e} (<= 0.005), exterior-angle spread = "
        f"{spread:.2e} deg (< 1e-4) over 360 azimuths, mean {exts.mean():.4f} deg",
    )


def test_criterion_2_bibo_phi90_eccentricity():
    tp = _infer(90.0, 4.10893, 90.0, 151.5)
    ecc = ring_eccentricity(
        trace_ring(PumpConfig(BIBO, 405.0, tp, 90.0 * DEG), 810.0, 8)
    )
    _verdict(
        2,
        abs(ecc - 0.166) <= 0.010,
        f"phi_p = 90 cut: theta_p = {tp / DEG:.5f} deg, ecc = {ecc:.5f} "
        f"(target 0.166 +- 0.010)",
    )


def test_criterion_3_bibo_phi0_eccentricity():
    tp = _infer(0.0, 4.05449, 0.0, 51.0)
    ecc = ring_eccentricity(
        trace_ring(PumpConfig(BIBO, 405.0, tp, 0.0), 810.0, 8)
    )
    _verdict(
        3,
        abs(ecc - 0.361) <= 0.015,
        f"phi_p = 0 cut: theta_p = {tp / DEG:.5f} deg, ecc = {ecc:.5f} "
        f"(target 0.361 +- 0.015)",
    )


def test_criterion_4_small_angle_model_agreement():
    checks = []
    for phi_p_deg, target, at_phi, near in (
        (90.0, 4.10893, 90.0, 151.5),
        (0.0, 4.05449, 0.0, 51.0),
    ):
        tp = _infer(phi_p_deg, target, at_phi, near)
        full = ring_eccentricity(
            trace_ring(PumpConfig(BIBO, 405.0, tp, phi_p_deg * DEG), 810.0, 8),
            "internal",
        )
        approx = eccentricity_estimate(
            make_expansion_point(BIBO, phi_p_deg * DEG, tp, 405.0)
        ).internal
        checks.append((phi_p_deg, full, approx, abs(approx - full) / full))
    bbo = eccentricity_estimate(
        make_expansion_point(BBO, 0.0, 29.392 * DEG, 405.0)
    ).internal
    ok = all(rel <= 0.10 for *_, rel in checks) and bbo < 0.01
    detail = "; ".join(
        f"phi_p={p:g}: full {f:.4f} vs model {a:.4f} ({r:.1%})"
        for p, f, a, r in checks
    )
    _verdict(4, ok, detail + f"; BBO model ecc = {bbo:.1e} (< 0.01)")


def test_criterion_5_minimum_eccentricity_wavelength():
    failures = []
    details = []
    lam_star_ref = None
    for tp_deg in (152.071, 151.378, 149.21):
        res = min_eccentricity_wavelength(BIBO, 90.0 * DEG, tp_deg * DEG)
        details.append(
            f"theta_p {tp_deg}: lambda* = {res.lambda_star_nm:.2f} nm, "
            f"ecc(lambda*) = {res.ecc_at_min:.2e}"
        )
        if res.at_edge or not (700.0 < res.lambda_star_nm < 800.0):
            failures.append(f"minimum for {tp_deg} not inside 700-800 nm")
        if res.ecc_at_min >= 0.05:
            failures.append(f"ecc at minimum for {tp_deg} not < 0.05")
        if tp_deg == 151.378:
            lam_star_ref = res.lambda_star_nm
            e810 = eccentricity_estimate(
                make_expansion_point(BIBO, 90.0 * DEG, tp_deg * DEG, 405.0)
            ).internal
            details.append(f"ecc(810 nm) = {e810:.4f}")
            if abs(e810 - 0.17) > 0.03:
                failures.append("ecc(810) outside 0.17 +- 0.03")
    crossing = term_crossing_wavelength(
        BIBO, 90.0 * DEG, (700.0, 780.0), theta_p0_near=152.1 * DEG
    )
    gap = abs(crossing - lam_star_ref)
    details.append(
        f"term1 = term2 crossing {crossing:.2f} nm vs lambda* "
        f"{lam_star_ref:.2f} nm (gap {gap:.1f} nm)"
    )
    if gap > 10.0:
        failures.append(
            f"crossing-vs-minimum gap {gap:.1f} nm exceeds 10 nm: the "
            "curvature-difference crossing ignores the squared-slope term, "
            "which shifts the true minimum by ~20 nm (see decision ledger)"
        )
    _verdict(5, not failures, "; ".join(details + failures))


def test_criterion_6_walkoff_and_exit_face():
    pump = PumpConfig(BIBO, 405.0, 151.56 * DEG, 90.0 * DEG)
    trace = trace_ring(pump, 810.0, 8)
    rho = {round(s.phi_s / DEG): s.rho_s / DEG for s in walkoff_ring(trace)}
    ef = exit_face_comparison(trace)
    ok = (
        abs(rho[0] - 3.19) <= 0.05
        and abs(rho[180] - 3.51) <= 0.05
        and abs(rho[90] - 3.36) <= 0.05
        and abs(rho[270] - 3.36) <= 0.05
        and abs(ef.ecc_poynting - 0.168) <= 0.002
        and abs(ef.ecc_wave_normal - 0.1685) <= 0.002
        and abs(ef.relative_difference - 0.003) <= 0.0015
    )
    _verdict(
        6,
        ok,
        f"rho(0/90/180/270) = {rho[0]:.3f}/{rho[90]:.3f}/{rho[180]:.3f}/"
        f"{rho[270]:.3f} deg; exit-face ecc {ef.ecc_poynting:.5f} (Poynting) vs "
        f"{ef.ecc_wave_normal:.5f} (wave normal), rel diff "
        f"{ef.relative_difference:.2%}",
    )


def test_criterion_7_image_fit_round_trip():
    rng = np.random.default_rng(7)
    hits = 0
    n = 50
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for i in range(n):
            ecc = rng.uniform(0.0, 0.5)
            b = rng.uniform(0.4, 0.6)
            truth = RingModel(
                amplitude=rng.uniform(1500.0, 4000.0),
                background=rng.uniform(50.0, 200.0),
                x0_cm=rng.uniform(-0.05, 0.05),
                y0_cm=rng.uniform(-0.05, 0.05),
                a_cm=b * math.sqrt(1.0 - ecc * ecc),
                b_cm=b,
                sigma_cm=rng.uniform(0.03, 0.08),
            )
            fit = fit_ring(synthesize(truth, 220, 220, seed=1000 + i))
            hits += abs(fit.eccentricity - truth.eccentricity) <= 0.01
        # noisy circular ring at low SNR: noise floor at the ~0.01 level
        circ = RingModel(amplitude=900.0, background=30.0, x0_cm=0.0, y0_cm=0.0,
                         a_cm=0.5, b_cm=0.5, sigma_cm=0.05)
        cfit = fit_ring(synthesize(circ, 220, 220, seed=71, read_noise=10.0))
    floor_ok = cfit.eccentricity < 0.05 and 1e-3 < cfit.stat_error < 5e-2
    _verdict(
        7,
        hits >= 0.95 * n and floor_ok,
        f"{hits}/{n} synthetic rings within +-0.01; circular ring ecc = "
        f"{cfit.eccentricity:.4f}, stat error = {cfit.stat_error:.4f} "
        f"(~0.01-level floor)",
    )


def test_criterion_8_sandwich_spectra():
    grid = np.linspace(-6e13, 6e13, 401)
    tp90 = _infer(90.0, 4.10893, 90.0, 151.5)
    tp0 = _infer(0.0, 4.05449, 0.0, 51.0)
    details = []
    failures = []
    rates_b = {}
    for label, phi_p_deg, tp in (("phi90", 90.0, tp90), ("phi0", 0.0, tp0)):
        pump = PumpConfig(BIBO, 405.0, tp, phi_p_deg * DEG)
        trace = trace_ring(pump, 810.0, 32)
        sw_a = sandwich_spectra(pump, trace, 135.0 * DEG, 100.0, 0.8, grid)
        ov_a = overlap_integral(sw_a.crystal_1, sw_a.crystal_2)
        if abs(ov_a - 1.0) > 1e-9:
            failures.append(f"{label} point A overlap {ov_a} not 1 within 1e-9")
        worst_b = 1.0
        for waist in (50.0, 100.0, 150.0, 200.0):
            sw_b = sandwich_spectra(pump, trace, 45.0 * DEG, waist, 0.8, grid)
            ov_b = overlap_integral(sw_b.crystal_1, sw_b.crystal_2)
            worst_b = min(worst_b, ov_b)
            if waist == 100.0:
                rates_b[label] = joint_rate(sw_b.crystal_1, 20.0)
        if worst_b <= 0.99:
            failures.append(f"{label} point B overlap {worst_b:.4f} not > 0.99")
        details.append(
            f"{label}: A overlap 1 - {abs(ov_a - 1.0):.1e}, worst B overlap "
            f"{worst_b:.6f} over 50-200 um"
        )
    if not rates_b["phi0"] < rates_b["phi90"]:
        failures.append("point-B rate ordering violated")
    details.append(
        f"point-B rates: phi0 {rates_b['phi0']:.4e} < phi90 "
        f"{rates_b['phi90']:.4e}"
    )
    _verdict(8, not failures, "; ".join(details + failures))


def test_criterion_9_invariant_suites():
    rng = np.random.default_rng(99)
    failures = []

    # uniaxial reduction oracle, 1e-12
    nx, _, nz = BBO.principal_indices(810.0)
    worst = 0.0
    for _ in range(120):
        theta = rng.uniform(0.02, math.pi - 0.02)
        phi = rng.uniform(0.0, 2 * math.pi)
        s = WaveDirection(theta, phi).unit_vector()
        n_fast, n_slow = wave_normal_indices((nx, nx, nz), s)
        n_e = 1.0 / math.sqrt(
            (math.cos(theta) / nx) ** 2 + (math.sin(theta) / nz) ** 2
        )
        worst = max(worst, abs(n_fast - n_e), abs(n_slow - nx))
    if worst > 1e-12:
        failures.append(f"uniaxial reduction error {worst:.1e} > 1e-12")

    # branch continuity under small perturbations
    principal = BIBO.principal_indices(810.0)
    jump = 0.0
    for _ in range(120):
        theta = rng.uniform(0.02, math.pi - 0.02)
        phi = rng.uniform(0.0, 2 * math.pi)
        eps = rng.uniform(-1e-6, 1e-6)
        a = wave_normal_indices(
            principal, WaveDirection(theta, phi).unit_vector()
        )
        b = wave_normal_indices(
            principal, WaveDirection(theta + eps, phi + eps).unit_vector()
        )
        jump = max(jump, abs(a[0] - b[0]), abs(a[1] - b[1]))
    if jump > 1e-4:
        failures.append(f"branch discontinuity {jump:.1e}")

    # phase-matching residual < 1e-9 on converged solutions
    worst_res = 0.0
    for _ in range(120):
        tp = rng.uniform(150.0, 152.0) * DEG
        phi_s = rng.uniform(0.0, 2 * math.pi)
        sol = solve_emission(
            PumpConfig(BIBO, 405.0, tp, 90.0 * DEG), 810.0, phi_s
        )
        worst_res = max(worst_res, sol.residual)
    if worst_res > 1e-9:
        failures.append(f"phase-matching residual {worst_res:.1e} > 1e-9")

    # overlap in [0, 1] for random non-negative curves
    grid = np.linspace(-1.0, 1.0, 101)
    for _ in range(150):
        s1 = SpectrumCurve(grid=grid, values=rng.uniform(0.0, 1.0, 101) + 1e-9)
        s2 = SpectrumCurve(grid=grid, values=rng.uniform(0.0, 1.0, 101) + 1e-9)
        ov = overlap_integral(s1, s2)
        if not (-1e-12 <= ov <= 1.0 + 1e-9):
            failures.append(f"overlap {ov} outside [0, 1]")
            break

    _verdict(
        9,
        not failures,
        f"uniaxial oracle worst {worst:.1e}; branch jump {jump:.1e}; "
        f"max residual {worst_res:.1e}; overlap bounds over 150 random curves"
        + ("; " + "; ".join(failures) if failures else ""),
    )
