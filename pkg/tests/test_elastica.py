import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from flexmech.core import DomainError
from flexmech.elastica import (
    angle_from_tip_force,
    bar_base_moment,
    gamma_integral,
    pure_moment_tip_angle,
    tip_force_from_angle,
    tip_shortening,
)
from flexmech.oracle import shoot_single_bar

L = 0.08


def _gamma_reference(tf, t0):
    # smooth after t = sqrt(sin t0 - sin theta): 2 dt / sqrt((1-u)(1+u)), u = sin t0 - t^2
    s0 = math.sin(t0)
    # sin t0 - sin tf written as a product to avoid cancellation near tf = t0
    lo = math.sqrt(max(2 * math.cos(0.5 * (t0 + tf)) * math.sin(0.5 * (t0 - tf)), 0.0))
    hi = math.sqrt(s0)
    f = lambda t: 2.0 / math.sqrt(1.0 - (s0 - t * t) ** 2)
    return quad(f, lo, hi, epsabs=0, epsrel=1e-13, limit=200)[0]


def test_gamma_small_angle():
    assert gamma_integral(0.01, 0.01) == pytest.approx(2 * math.sqrt(0.01), rel=5e-3)
    assert gamma_integral(0.01, 0.01) == pytest.approx(0.19997, abs=5e-4)


def test_gamma_half_angle_matches_reference():
    assert gamma_integral(0.15, 0.3) == pytest.approx(_gamma_reference(0.15, 0.3), rel=1e-8)


@settings(max_examples=60, deadline=None)
@given(t0=st.floats(1e-4, 1.5), frac=st.floats(0.0, 1.0))
def test_gamma_matches_reference(t0, frac):
    tf = frac * t0
    assert gamma_integral(tf, t0) == pytest.approx(_gamma_reference(tf, t0), rel=1e-8)


@pytest.mark.parametrize("tf,t0", [(0.4, 0.3), (0.1, math.pi / 2), (-0.1, 0.2)])
def test_gamma_domain(tf, t0):
    with pytest.raises(DomainError):
        gamma_integral(tf, t0)


def test_tip_force_zero():
    assert tip_force_from_angle(0.0, L, 1.988e-2) == 0.0


def test_tip_force_small_angle(default_ei):
    f = tip_force_from_angle(0.01, L, default_ei)
    assert f == pytest.approx(62.1e-3, rel=1e-2)
    assert f == pytest.approx(2 * default_ei * 0.01 / L**2, rel=1e-2)


def test_tip_force_matches_oracle(default_ei):
    f = tip_force_from_angle(0.28, L, default_ei)
    res = shoot_single_bar(f, 0.0, L, default_ei)
    assert res.tip_angle == pytest.approx(0.28, rel=1e-2)


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-3, 1.4))
def test_force_angle_inverse(theta):
    ei = 1.988e-2
    f = tip_force_from_angle(theta, L, ei)
    assert angle_from_tip_force(f, L, ei) == pytest.approx(theta, rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-3, 1.4), st.floats(1e-3, 1.4))
def test_tip_force_monotone(a, b):
    lo, hi = sorted((a, b))
    if hi - lo > 1e-9:
        assert tip_force_from_angle(lo, L, 1.988e-2) < tip_force_from_angle(hi, L, 1.988e-2)


def test_pure_moment_identities(default_ei):
    assert pure_moment_tip_angle(0.0, L, default_ei) == 0.0
    assert pure_moment_tip_angle(default_ei / L, L, default_ei) == pytest.approx(1.0, rel=1e-15)
    assert pure_moment_tip_angle(4.97e-3, L, 1.988e-2) == pytest.approx(0.0200, rel=1e-3)


def test_base_moment_pure_force_matches_oracle(default_ei):
    m = bar_base_moment(0.28, 0.0, 0.28, L, default_ei)
    f = tip_force_from_angle(0.28, L, default_ei)
    res = shoot_single_bar(f, 0.0, L, default_ei)
    assert m == pytest.approx(res.base_moment, rel=1e-6)


def test_tip_shortening_zero():
    assert tip_shortening(0.0, 0.0, L) == 0.0


def test_tip_shortening_matches_oracle(default_ei):
    f = tip_force_from_angle(0.28, L, default_ei)
    res = shoot_single_bar(f, 0.0, L, default_ei, n_steps=800)
    assert tip_shortening(0.28, 0.0, L) == pytest.approx(res.tip_shortening, rel=1e-4)
