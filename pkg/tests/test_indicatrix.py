import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ringtrace.dispersion import get_crystal
from ringtrace.errors import GeometryError
from ringtrace import indicatrix
from ringtrace.indicatrix import (
    FAST,
    SLOW,
    WaveDirection,
    fresnel_residual,
    index_derivatives,
    offset_direction,
    offset_index,
    pump_frame,
    wave_normal_indices,
)

BBO = get_crystal("BBO")
BIBO = get_crystal("BiBO")

angles = st.floats(min_value=0.01, max_value=math.pi - 0.01)
azimuths = st.floats(min_value=0.0, max_value=2.0 * math.pi)


def uniaxial_reference(no, ne, theta):
    """Closed-form ordinary/extraordinary indices for a uniaxial crystal."""
    inv2 = (math.cos(theta) / no) ** 2 + (math.sin(theta) / ne) ** 2
    return no, 1.0 / math.sqrt(inv2)


@settings(max_examples=150, deadline=None)
@given(theta=angles, phi=azimuths)
def test_uniaxial_reduction_oracle(theta, phi):
    nx, ny, nz = BBO.principal_indices(810.0)
    s = WaveDirection(theta, phi).unit_vector()
    n_fast, n_slow = wave_normal_indices((nx, ny, nz), s)
    n_o, n_e = uniaxial_reference(nx, nz, theta)
    # negative uniaxial: extraordinary branch is the fast one
    assert n_fast == pytest.approx(n_e, abs=1e-12)
    assert n_slow == pytest.approx(n_o, abs=1e-12)


@settings(max_examples=150, deadline=None)
@given(theta=angles, phi=azimuths)
def test_fresnel_residual_vanishes(theta, phi):
    principal = BIBO.principal_indices(810.0)
    s = WaveDirection(theta, phi).unit_vector()
    for n in wave_normal_indices(principal, s):
        assert abs(fresnel_residual(principal, s, n)) < 1e-12


@settings(max_examples=150, deadline=None)
@given(theta=angles, phi=azimuths, eps=st.floats(min_value=-1e-6, max_value=1e-6))
def test_branch_continuity(theta, phi, eps):
    principal = BIBO.principal_indices(810.0)
    s1 = WaveDirection(theta, phi).unit_vector()
    s2 = WaveDirection(theta + eps, phi + eps).unit_vector()
    f1, w1 = wave_normal_indices(principal, s1)
    f2, w2 = wave_normal_indices(principal, s2)
    assert abs(f1 - f2) < 1e-4
    assert abs(w1 - w2) < 1e-4


def test_fast_not_above_slow_everywhere():
    principal = BIBO.principal_indices(810.0)
    rng = np.random.default_rng(3)
    for _ in range(200):
        v = rng.normal(size=3)
        n_fast, n_slow = wave_normal_indices(principal, v)
        assert n_fast <= n_slow + 1e-15


def test_principal_direction_values():
    nx, ny, nz = BIBO.principal_indices(810.0)
    # along z the eigenindices are nx and ny
    n_fast, n_slow = wave_normal_indices((nx, ny, nz), np.array([0.0, 0.0, 1.0]))
    assert n_fast == pytest.approx(nx, abs=1e-14)
    assert n_slow == pytest.approx(ny, abs=1e-14)


def test_pump_frame_orthonormal_and_oriented():
    xp, yp, zp = pump_frame(math.radians(151.0), math.radians(90.0))
    for a, b in ((xp, yp), (yp, zp), (xp, zp)):
        assert abs(np.dot(a, b)) < 1e-14
    for v in (xp, yp, zp):
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-14)
    # x' points away from the crystal z-axis
    assert np.dot(xp, np.array([0.0, 0.0, 1.0])) < 0.0


def test_pump_frame_undefined_along_z():
    with pytest.raises(GeometryError):
        pump_frame(0.0, 0.0)


def test_offset_direction_sign_convention():
    theta_p, phi_p = math.radians(151.0), math.radians(90.0)
    v_neg = offset_direction(theta_p, phi_p, 0.0, -0.05)
    v_flip = offset_direction(theta_p, phi_p, math.pi, 0.05)
    assert np.allclose(v_neg, v_flip, atol=1e-14)


def test_offset_index_matches_branch_at_zero():
    theta_p, phi_p = math.radians(151.0), math.radians(90.0)
    n = offset_index(BIBO, 810.0, theta_p, phi_p, 0.3, 0.0, SLOW)
    s = WaveDirection(theta_p, phi_p).unit_vector()
    ref = wave_normal_indices(BIBO.principal_indices(810.0), s)[1]
    assert n == pytest.approx(ref, abs=1e-14)


def test_index_derivatives_match_finite_differences():
    theta_p, phi_p = math.radians(152.077), math.radians(90.0)
    d = index_derivatives(BIBO, 810.0, theta_p, phi_p, 0.0, SLOW)

    def f(t):
        return offset_index(BIBO, 810.0, theta_p, phi_p, 0.0, t, SLOW)

    h = 2e-4
    assert d.d_theta_s == pytest.approx((f(h) - f(-h)) / (2 * h), rel=1e-5)
    assert d.d2_theta_s == pytest.approx(
        (f(h) - 2 * f(0.0) + f(-h)) / h**2, rel=1e-3
    )
    assert math.isfinite(d.d2_mixed)


def test_uniaxial_slow_branch_angle_independent():
    # ordinary wave of a negative uniaxial crystal: no angular dependence
    vals = [
        offset_index(BBO, 810.0, math.radians(t), 0.0, 0.0, 0.0, SLOW)
        for t in (10.0, 40.0, 80.0, 120.0)
    ]
    assert max(vals) - min(vals) < 1e-13


def test_fast_branch_between_principal_indices():
    nx, ny, nz = BIBO.principal_indices(405.0)
    n = offset_index(BIBO, 405.0, math.radians(151.0), math.radians(90.0), 0.0, 0.0, FAST)
    assert nx - 1e-12 <= n <= nz + 1e-12
