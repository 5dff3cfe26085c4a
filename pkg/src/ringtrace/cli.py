"""Command-line interface.

Angles are degrees and wavelengths nanometres at this boundary; everything
is converted to radians before touching the library. Numeric output carries
at least 9 significant digits. Exit codes: 0 success, 2 argument/validation
error, 3 numeric failure (no solution / non-convergence).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys

import numpy as np

from . import imagefit, smallangle, spectra, walkoff
from .dispersion import get_crystal, load_crystal_database
from .errors import CrystalDataError, RingtraceError
from .phasematch import (
    PumpConfig,
    infer_pump_angle,
    ring_eccentricity,
    trace_ring,
)

DEG = math.pi / 180.0


def _fmt(v: float) -> str:
    return f"{v:.12g}"


def _emit_json(obj):
    print(json.dumps(obj, indent=2))


def _csv_writer(path):
    if path in (None, "-"):
        return csv.writer(sys.stdout)
    return csv.writer(open(path, "w", newline=""))


def _species(args):
    return get_crystal(args.crystal, path=args.crystal_db)


def _pump(args, species) -> PumpConfig:
    return PumpConfig(
        species=species,
        lambda_p_nm=args.lambda_p,
        theta_p=args.theta_p * DEG,
        phi_p=args.phi_p * DEG,
    )


def cmd_crystals(args):
    reg = load_crystal_database(args.crystal_db)
    _emit_json(
        {
            cid: {
                "symmetry": sp.symmetry,
                "valid_range_nm": list(sp.valid_range_nm),
                "source": sp.source,
            }
            for cid, sp in sorted(reg.items())
        }
    )


def cmd_ring(args):
    pump = _pump(args, _species(args))
    trace = trace_ring(pump, args.lambda_s, args.samples)
    w = _csv_writer(args.out)
    w.writerow(
        ["phi_s_deg", "theta_s_deg", "theta_i_deg", "theta_s_ext_deg",
         "n_s", "n_i", "residual"]
    )
    for s in trace.samples:
        w.writerow(
            [_fmt(s.phi_s / DEG), _fmt(s.theta_s / DEG), _fmt(s.theta_i / DEG),
             _fmt(s.theta_s_ext / DEG), _fmt(s.n_s), _fmt(s.n_i),
             _fmt(s.residual)]
        )


def cmd_ecc(args):
    pump = _pump(args, _species(args))
    trace = trace_ring(pump, args.lambda_s, max(args.samples, 8))
    _emit_json(
        {
            "crystal": args.crystal,
            "theta_p_deg": args.theta_p,
            "phi_p_deg": args.phi_p,
            "ecc_external": ring_eccentricity(trace, "external"),
            "ecc_internal": ring_eccentricity(trace, "internal"),
        }
    )


def cmd_infer_theta(args):
    species = _species(args)
    theta_p = infer_pump_angle(
        species,
        args.phi_p * DEG,
        args.lambda_p,
        args.lambda_s,
        args.target_ext * DEG,
        at_phi_s=args.at_phi_s * DEG,
        theta_p_near=None if args.near is None else args.near * DEG,
    )
    pump = PumpConfig(species, args.lambda_p, theta_p, args.phi_p * DEG)
    trace = trace_ring(pump, args.lambda_s, 8)
    _emit_json(
        {
            "theta_p_deg": theta_p / DEG,
            "target_ext_deg": args.target_ext,
            "at_phi_s_deg": args.at_phi_s,
            "ecc_external": ring_eccentricity(trace, "external"),
        }
    )


def cmd_min_lambda(args):
    species = _species(args)
    res = smallangle.min_eccentricity_wavelength(
        species,
        args.phi_p * DEG,
        args.theta_p * DEG,
        bracket_nm=(args.lo, args.hi),
        anchor_nm=args.anchor,
    )
    _emit_json(
        {
            "lambda_star_nm": res.lambda_star_nm,
            "ecc_at_min": res.ecc_at_min,
            "bracket_nm": list(res.bracket_nm),
            "theta_p_deg": args.theta_p,
            "at_bracket_edge": res.at_edge,
        }
    )


def cmd_terms(args):
    species = _species(args)
    phi_p = args.phi_p * DEG
    if args.crossing:
        lam = smallangle.term_crossing_wavelength(
            species, phi_p, (args.lo, args.hi), theta_p0_near=args.near * DEG
        )
        _emit_json({"crossing_nm": lam})
        return
    w = _csv_writer(args.out)
    w.writerow(["lambda_nm", "theta_p0_deg", "term1", "term2", "term3"])
    near = args.near * DEG
    for lam in np.linspace(args.hi, args.lo, args.samples):
        tp0 = smallangle.collinear_pump_angle(species, phi_p, lam / 2.0, near=near)
        near = tp0
        t = smallangle.eccentricity_terms(
            smallangle.make_expansion_point(species, phi_p, tp0, lam / 2.0,
                                            theta_p0=tp0)
        )
        w.writerow([_fmt(lam), _fmt(tp0 / DEG), _fmt(t.term1), _fmt(t.term2),
                    _fmt(t.term3)])


def cmd_walkoff(args):
    pump = _pump(args, _species(args))
    trace = trace_ring(pump, args.lambda_s, args.samples)
    w = _csv_writer(args.out)
    w.writerow(["phi_s_deg", "rho_s_deg", "rho_i_deg"])
    for s in walkoff.walkoff_ring(trace):
        w.writerow([_fmt(s.phi_s / DEG), _fmt(s.rho_s / DEG), _fmt(s.rho_i / DEG)])


def cmd_exitface(args):
    pump = _pump(args, _species(args))
    trace = trace_ring(pump, args.lambda_s, max(args.samples, 8))
    ef = walkoff.exit_face_comparison(trace)
    _emit_json(
        {
            "ecc_wave_normal": ef.ecc_wave_normal,
            "ecc_poynting": ef.ecc_poynting,
            "relative_difference": ef.relative_difference,
            "semi_axes_wave_normal": list(ef.semi_wave),
            "semi_axes_poynting": list(ef.semi_poynting),
            "center_poynting": list(ef.center_poynting),
        }
    )


def _sandwich(args):
    species = _species(args)
    pump = _pump(args, species)
    trace = trace_ring(pump, 2.0 * args.lambda_p, 32)
    grid = np.linspace(-args.span, args.span, args.points)
    return spectra.sandwich_spectra(
        pump, trace, args.phi_s * DEG, args.waist, args.length, grid
    )


def cmd_spectra(args):
    sw = _sandwich(args)
    w = _csv_writer(args.out)
    w.writerow(["delta_omega_rad_s", "s_crystal1", "s_crystal2"])
    for g, v1, v2 in zip(sw.crystal_1.grid, sw.crystal_1.values,
                         sw.crystal_2.values):
        w.writerow([_fmt(g), _fmt(v1), _fmt(v2)])


def cmd_overlap(args):
    sw = _sandwich(args)
    ov = sw.overlap()
    _emit_json(
        {
            "overlap": ov.overlap,
            "rate_1": ov.rate_1,
            "rate_2": ov.rate_2,
            "collection_pointing_deg": ov.collection.theta_ext / DEG,
            "collection_phi_deg": ov.collection.phi / DEG,
            "waist_um": ov.collection.waist_um,
        }
    )


def cmd_synth(args):
    b = args.radius / (1.0 - args.ecc ** 2) ** 0.25
    a = args.radius ** 2 / b
    model = imagefit.RingModel(
        amplitude=args.amplitude,
        background=args.background,
        x0_cm=args.x0,
        y0_cm=args.y0,
        a_cm=a,
        b_cm=b,
        sigma_cm=args.sigma,
    )
    img = imagefit.synthesize(
        model,
        width=args.width,
        height=args.height,
        seed=args.seed,
        poisson=not args.no_poisson,
        read_noise=args.read_noise,
    )
    if args.out.endswith(".csv"):
        imagefit.write_csv(img, args.out)
    else:
        imagefit.write_pgm(img, args.out)
    _emit_json(
        {"out": args.out, "truth_ecc": model.eccentricity,
         "a_cm": a, "b_cm": b}
    )


def cmd_fit(args):
    if args.image.endswith(".csv"):
        img = imagefit.read_csv(args.image)
    else:
        img = imagefit.read_pgm(args.image)
    fit = imagefit.fit_ring(img)
    m = fit.model
    _emit_json(
        {
            "amplitude": m.amplitude,
            "background": m.background,
            "x0_cm": m.x0_cm,
            "y0_cm": m.y0_cm,
            "a_cm": m.a_cm,
            "b_cm": m.b_cm,
            "sigma_cm": m.sigma_cm,
            "ecc": fit.eccentricity,
            "ecc_stat_error": fit.stat_error,
            "residual_rms": fit.residual_rms,
        }
    )


def cmd_repro(args):
    """Reproduction suite: ring tables, eccentricities, minimum wavelength,
    walk-off, exit face, spectra overlaps — one summary JSON."""
    db = args.crystal_db
    bbo = get_crystal("BBO", path=db)
    bibo = get_crystal("BiBO", path=db)
    report = {}

    trace_bbo = trace_ring(PumpConfig(bbo, 405.0, 29.392 * DEG, 0.0), 810.0, 32)
    exts = [s.theta_s_ext / DEG for s in trace_bbo.samples]
    report["bbo_ring"] = {
        "ecc": ring_eccentricity(trace_bbo),
        "ext_mean_deg": float(np.mean(exts)),
        "ext_spread_deg": float(np.max(exts) - np.min(exts)),
    }

    for label, phi_p, target, at_phi in (
        ("bibo_phi90", 90.0, 4.10893, 90.0),
        ("bibo_phi0", 0.0, 4.05449, 0.0),
    ):
        tp = infer_pump_angle(
            bibo, phi_p * DEG, 405.0, 810.0, target * DEG,
            at_phi_s=at_phi * DEG,
            theta_p_near=(151.5 if phi_p == 90.0 else 51.0) * DEG,
        )
        tr = trace_ring(PumpConfig(bibo, 405.0, tp, phi_p * DEG), 810.0, 8)
        pt = smallangle.make_expansion_point(bibo, phi_p * DEG, tp, 405.0)
        report[label] = {
            "theta_p_deg": tp / DEG,
            "ecc_full": ring_eccentricity(tr),
            "ecc_expansion": smallangle.eccentricity_estimate(pt).internal,
        }

    mins = {}
    for tp_deg in (152.071, 151.378, 149.21):
        r = smallangle.min_eccentricity_wavelength(bibo, 90.0 * DEG, tp_deg * DEG)
        mins[str(tp_deg)] = {"lambda_star_nm": r.lambda_star_nm,
                             "ecc_at_min": r.ecc_at_min}
    report["min_ecc_sweep"] = mins
    report["term_crossing_nm"] = smallangle.term_crossing_wavelength(
        bibo, 90.0 * DEG, (700.0, 780.0), theta_p0_near=152.1 * DEG
    )

    pw = PumpConfig(bibo, 405.0, 151.56 * DEG, 90.0 * DEG)
    trw = trace_ring(pw, 810.0, 8)
    rho = {
        f"{round(s.phi_s / DEG)}": s.rho_s / DEG
        for s in walkoff.walkoff_ring(trw)
        if round(s.phi_s / DEG) in (0, 90, 180, 270)
    }
    ef = walkoff.exit_face_comparison(trw)
    report["walkoff_deg"] = rho
    report["exit_face"] = {
        "ecc_wave_normal": ef.ecc_wave_normal,
        "ecc_poynting": ef.ecc_poynting,
        "relative_difference": ef.relative_difference,
    }

    grid = np.linspace(-6e13, 6e13, 401)
    overlaps = {}
    for label, phi_p, tp_deg in (
        ("phi90", 90.0, report["bibo_phi90"]["theta_p_deg"]),
        ("phi0", 0.0, report["bibo_phi0"]["theta_p_deg"]),
    ):
        pump = PumpConfig(bibo, 405.0, tp_deg * DEG, phi_p * DEG)
        tr = trace_ring(pump, 810.0, 32)
        for point, phi_s in (("A", 135.0), ("B", 45.0)):
            sw = spectra.sandwich_spectra(pump, tr, phi_s * DEG, 100.0, 0.8, grid)
            ov = sw.overlap()
            overlaps[f"{label}_point_{point}"] = {
                "overlap": ov.overlap, "rate_1": ov.rate_1, "rate_2": ov.rate_2,
            }
    report["sandwich_overlaps"] = overlaps

    out = json.dumps(report, indent=2)
    if args.out not in (None, "-"):
        with open(args.out, "w") as fh:
            fh.write(out + "\n")
    print(out)


def _add_common(p, crystal=True, pump=True, lambda_s=True, samples=None):
    if crystal:
        p.add_argument("--crystal", required=True, help="crystal id, e.g. BBO")
    if pump:
        p.add_argument("--phi-p", type=float, required=True,
                       help="pump azimuth in the crystal frame, degrees")
        p.add_argument("--theta-p", type=float, required=True,
                       help="pump polar angle, degrees")
        p.add_argument("--lambda-p", type=float, required=True,
                       help="pump wavelength, nm")
    if lambda_s:
        p.add_argument("--lambda-s", type=float, required=True,
                       help="signal wavelength, nm")
    if samples is not None:
        p.add_argument("--samples", type=int, default=samples,
                       help="azimuthal sample count")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ringtrace",
        description="Down-conversion ring geometry in birefringent crystals",
    )
    ap.add_argument("--crystal-db", default=None,
                    help="crystal data file (overrides RINGTRACE_CRYSTAL_DB)")
    ap.add_argument("--threads", type=int, default=None,
                    help="cap on worker threads (currently single-threaded)")
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("crystals", help="list available crystals").set_defaults(
        func=cmd_crystals
    )

    p = sub.add_parser("ring", help="trace the emission ring")
    _add_common(p, samples=360)
    p.add_argument("--out", default="-", help="CSV path or - for stdout")
    p.set_defaults(func=cmd_ring)

    p = sub.add_parser("ecc", help="ring eccentricity from the full solver")
    _add_common(p, samples=8)
    p.set_defaults(func=cmd_ecc)

    p = sub.add_parser("infer-theta",
                       help="pump angle matching a target exterior angle")
    p.add_argument("--crystal", required=True)
    p.add_argument("--phi-p", type=float, required=True)
    p.add_argument("--lambda-p", type=float, required=True)
    p.add_argument("--lambda-s", type=float, required=True)
    p.add_argument("--target-ext", type=float, required=True,
                   help="target exterior angle, degrees")
    p.add_argument("--at-phi-s", type=float, required=True,
                   help="azimuth of the target, degrees")
    p.add_argument("--near", type=float, default=None,
                   help="search near this pump angle, degrees")
    p.set_defaults(func=cmd_infer_theta)

    p = sub.add_parser("min-lambda",
                       help="degenerate wavelength of minimum eccentricity")
    p.add_argument("--crystal", required=True)
    p.add_argument("--phi-p", type=float, required=True)
    p.add_argument("--theta-p", type=float, required=True)
    p.add_argument("--lo", type=float, default=700.0)
    p.add_argument("--hi", type=float, default=800.0)
    p.add_argument("--anchor", type=float, default=810.0,
                   help="wavelength defining the pump detuning, nm")
    p.set_defaults(func=cmd_min_lambda)

    p = sub.add_parser("terms",
                       help="eccentricity term decomposition vs wavelength")
    p.add_argument("--crystal", required=True)
    p.add_argument("--phi-p", type=float, required=True)
    p.add_argument("--lo", type=float, default=700.0)
    p.add_argument("--hi", type=float, default=810.0)
    p.add_argument("--samples", type=int, default=56)
    p.add_argument("--near", type=float, required=True,
                   help="collinear pump angle near the hi edge, degrees")
    p.add_argument("--crossing", action="store_true",
                   help="emit only the term1 = term2 crossing wavelength")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_terms)

    p = sub.add_parser("walkoff", help="walk-off angles around the ring")
    _add_common(p, samples=8)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_walkoff)

    p = sub.add_parser("exitface",
                       help="exit-face ring with vs without walk-off")
    _add_common(p, samples=8)
    p.set_defaults(func=cmd_exitface)

    for name, func, hlp in (
        ("spectra", cmd_spectra, "sandwich pair spectra at one azimuth"),
        ("overlap", cmd_overlap, "sandwich spectral overlap at one azimuth"),
    ):
        p = sub.add_parser(name, help=hlp)
        _add_common(p, lambda_s=False)
        p.add_argument("--phi-s", type=float, required=True,
                       help="collection azimuth, degrees")
        p.add_argument("--waist", type=float, default=100.0,
                       help="collection-mode waist, um")
        p.add_argument("--length", type=float, default=0.8,
                       help="crystal length, mm")
        p.add_argument("--points", type=int, default=2001)
        p.add_argument("--span", type=float, default=6e13,
                       help="grid half-width, rad/s")
        if name == "spectra":
            p.add_argument("--out", default="-")
        p.set_defaults(func=func)

    p = sub.add_parser("synth", help="synthesize a ring image")
    p.add_argument("--ecc", type=float, required=True)
    p.add_argument("--radius", type=float, default=0.5,
                   help="geometric-mean ring radius, cm")
    p.add_argument("--amplitude", type=float, default=1000.0)
    p.add_argument("--background", type=float, default=100.0)
    p.add_argument("--sigma", type=float, default=0.05, help="ring width, cm")
    p.add_argument("--x0", type=float, default=0.0)
    p.add_argument("--y0", type=float, default=0.0)
    p.add_argument("--width", type=int, default=220)
    p.add_argument("--height", type=int, default=220)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--read-noise", type=float, default=5.0)
    p.add_argument("--no-poisson", action="store_true")
    p.add_argument("--out", required=True, help=".pgm or .csv path")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="fit a ring image")
    p.add_argument("--image", required=True, help=".pgm or .csv path")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("repro", help="run the full reproduction suite")
    p.add_argument("--out", default="-", help="summary JSON path")
    p.set_defaults(func=cmd_repro)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        args.func(args)
    except (ValueError, OSError, CrystalDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RingtraceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
