import csv
import io
import json
import math

import pytest

from ringtrace.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_crystals_lists_both(capsys):
    code, out, _ = run(capsys, "crystals")
    assert code == 0
    data = json.loads(out)
    assert set(data) >= {"BBO", "BiBO"}
    assert data["BBO"]["symmetry"] == "uniaxial-negative"


def test_unknown_crystal_exit_2(capsys):
    code, _, err = run(
        capsys, "ecc", "--crystal", "XYZ", "--phi-p", "0",
        "--theta-p", "29.392", "--lambda-p", "405", "--lambda-s", "810",
    )
    assert code == 2
    assert "BBO" in err and "BiBO" in err


def test_ecc_bbo_near_zero(capsys):
    code, out, _ = run(
        capsys, "ecc", "--crystal", "BBO", "--phi-p", "0",
        "--theta-p", "29.392", "--lambda-p", "405", "--lambda-s", "810",
    )
    assert code == 0
    assert json.loads(out)["ecc_external"] < 1e-3


def test_closed_ring_exit_3(capsys):
    code, _, err = run(
        capsys, "ecc", "--crystal", "BiBO", "--phi-p", "90",
        "--theta-p", "153.0", "--lambda-p", "405", "--lambda-s", "810",
    )
    assert code == 3
    assert err.startswith("error:")


def test_ring_csv_header_and_row_count(capsys):
    code, out, _ = run(
        capsys, "ring", "--crystal", "BiBO", "--phi-p", "90",
        "--theta-p", "151.563", "--lambda-p", "405", "--lambda-s", "810",
        "--samples", "8",
    )
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0][0] == "phi_s_deg"
    assert len(rows) == 9
    # 9+ significant digits present
    assert len(rows[1][1].replace(".", "").replace("-", "").lstrip("0")) >= 9


def test_infer_theta_matches_reference(capsys):
    code, out, _ = run(
        capsys, "infer-theta", "--crystal", "BiBO", "--phi-p", "90",
        "--lambda-p", "405", "--lambda-s", "810",
        "--target-ext", "4.10893", "--at-phi-s", "90", "--near", "151.5",
    )
    assert code == 0
    data = json.loads(out)
    assert data["theta_p_deg"] == pytest.approx(151.35859, abs=1e-4)
    assert data["ecc_external"] == pytest.approx(0.1659, abs=1e-3)


def test_min_lambda(capsys):
    code, out, _ = run(
        capsys, "min-lambda", "--crystal", "BiBO", "--phi-p", "90",
        "--theta-p", "151.378",
    )
    assert code == 0
    data = json.loads(out)
    assert 700.0 < data["lambda_star_nm"] < 800.0
    assert not data["at_bracket_edge"]


def test_terms_crossing(capsys):
    code, out, _ = run(
        capsys, "terms", "--crystal", "BiBO", "--phi-p", "90",
        "--near", "152.1", "--crossing",
    )
    assert code == 0
    assert json.loads(out)["crossing_nm"] == pytest.approx(718.95, abs=0.5)


def test_walkoff_csv(capsys):
    code, out, _ = run(
        capsys, "walkoff", "--crystal", "BiBO", "--phi-p", "90",
        "--theta-p", "151.56", "--lambda-p", "405", "--lambda-s", "810",
    )
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    rho0 = float(rows[1][1])
    assert rho0 == pytest.approx(3.19, abs=0.02)


def test_exitface_json(capsys):
    code, out, _ = run(
        capsys, "exitface", "--crystal", "BiBO", "--phi-p", "90",
        "--theta-p", "151.56", "--lambda-p", "405", "--lambda-s", "810",
    )
    assert code == 0
    data = json.loads(out)
    assert data["relative_difference"] == pytest.approx(0.003, abs=1e-3)


def test_overlap_json(capsys):
    code, out, _ = run(
        capsys, "overlap", "--crystal", "BiBO", "--phi-p", "90",
        "--theta-p", "151.3585886", "--lambda-p", "405",
        "--phi-s", "135", "--points", "301",
    )
    assert code == 0
    data = json.loads(out)
    assert data["overlap"] == pytest.approx(1.0, abs=1e-9)


def test_spectra_csv(capsys):
    code, out, _ = run(
        capsys, "spectra", "--crystal", "BiBO", "--phi-p", "90",
        "--theta-p", "151.3585886", "--lambda-p", "405",
        "--phi-s", "45", "--points", "101",
    )
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["delta_omega_rad_s", "s_crystal1", "s_crystal2"]
    assert len(rows) == 102


def test_synth_fit_round_trip(tmp_path, capsys):
    img = tmp_path / "ring.pgm"
    code, out, _ = run(
        capsys, "synth", "--ecc", "0.172", "--seed", "7", "--out", str(img),
    )
    assert code == 0
    truth = json.loads(out)["truth_ecc"]
    code, out, _ = run(capsys, "fit", "--image", str(img))
    assert code == 0
    fit = json.loads(out)
    assert fit["ecc"] == pytest.approx(truth, abs=0.01)
    assert fit["ecc_stat_error"] > 0.0


def test_synth_deterministic(tmp_path, capsys):
    p1, p2 = tmp_path / "a.pgm", tmp_path / "b.pgm"
    run(capsys, "synth", "--ecc", "0.2", "--seed", "3", "--out", str(p1))
    run(capsys, "synth", "--ecc", "0.2", "--seed", "3", "--out", str(p2))
    assert p1.read_bytes() == p2.read_bytes()
