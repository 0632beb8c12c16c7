import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qscatter.model import DEFAULT_PARAMS, Family
from qscatter.observables import (cdf, continuity_residual, current_closed, current_generic,
                                  f0, f1, f2, f3, flow, moments, norm_at, normalize,
                                  random_probes, rho_closed, rho_generic)

N2 = 4 / 9


def test_squared_norm_and_constant():
    n = normalize("i,nr")
    assert abs(n.squared_norm - 2.25) < 0.01
    assert abs(n.norm_constant - 2 / 3) < 0.002
    assert normalize("f,G").norm_constant == 1.0
    assert normalize("f,nr").squared_norm == n.squared_norm


def test_rho_closed_matches_modulus(fields):
    f = fields["i,nr"]
    n2 = f.norm_constant ** 2
    x = np.linspace(-20, 20, 81)
    for t in (0.0, 5.0, 13.0):
        a, b = rho_closed(x, t, DEFAULT_PARAMS, n2), np.abs(f.psi(x, t)) ** 2
        mask = b > 1e-30
        assert np.all(np.abs(a[mask] - b[mask]) <= 1e-10 * b[mask])


def test_rho_closed_at_center():
    rho = rho_closed(-10.0, 0.0, DEFAULT_PARAMS, N2)
    assert abs(rho - N2 * 2 / math.sqrt(2 * math.pi)) < 1e-8
    assert rho_closed(30.0, 0.0, DEFAULT_PARAMS, N2) < 1e-80


def test_f3_hand_value_and_t0_current(fields):
    assert abs(f3(-10.0, DEFAULT_PARAMS) - 40) < 1e-6
    for c in (f2, f1, f0):
        assert c(np.array([-10.0, -3.0]), 0.0, DEFAULT_PARAMS).tolist() == [0.0, 0.0]
    f = fields["i,nr"]
    n2 = f.norm_constant ** 2
    j = current_closed(-10.0, 0.0, DEFAULT_PARAMS, n2)
    assert abs(j - n2 * 40 * math.sqrt(2 / math.pi) / 32) < 1e-6
    assert abs(j - current_generic(f, -10.0, 0.0)) < 1e-15


def test_current_generic_matches_closed(fields):
    f = fields["i,nr"]
    n2 = f.norm_constant ** 2
    x, t = random_probes(100, norm2=n2, seed=3)
    a = current_closed(x, t, DEFAULT_PARAMS, n2)
    b = current_generic(f, x, t)
    assert np.all(np.abs(a - b) <= 1e-10 * np.abs(b) + 1e-14)
    c = current_generic(f, x[:5], t[:5], method="fd")
    assert np.allclose(c, b[:5], rtol=1e-8, atol=1e-12)
    with pytest.raises(ValueError):
        current_generic(f, 0.0, 1.0, method="spline")


def test_free_gaussian_current_at_t0(fields):
    f = fields["f,G"]
    x = np.linspace(-14, -6, 9)
    assert np.allclose(current_generic(f, x, 0.0), DEFAULT_PARAMS.k0_bar * rho_generic(f, x, 0.0),
                       rtol=1e-13, atol=0)


def test_far_tail_current_vanishes():
    for t in (0.0, 10.0, 20.0):
        sigma_t = math.sqrt(1 + t * t / 4)
        x = -10 + t + np.array([-15.0, 15.0]) * sigma_t
        assert np.all(np.abs(current_closed(x, t, DEFAULT_PARAMS, N2)) < 1e-30)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_continuity_property(seed):
    x, t = random_probes(10, norm2=N2, seed=seed)
    assert continuity_residual(x, t, DEFAULT_PARAMS, N2).max() < 1e-5


def test_mutated_coefficient_breaks_continuity():
    x, t = random_probes(100, norm2=N2, seed=1)
    mutated = (f3, lambda x, t, p, u=None: 1.01 * f2(x, t, p, u), f1, f0)
    assert continuity_residual(x, t, DEFAULT_PARAMS, N2, coefficients=mutated).max() > 1e-5


def test_moment_anchors(fields):
    m = moments(fields["i,nr"], 0.0)
    assert abs(m.mean_p - 1.2222) < 1e-3
    assert abs(m.mean_x + 10.4444) < 1e-3
    g = moments(fields["f,G"], 0.0)
    assert abs(g.mean_x + 10) < 1e-12 and abs(g.mean_p - 1) < 1e-12 and abs(g.delta_x - 1) < 1e-12


def test_free_nonreflecting_ehrenfest_line(fields):
    f = fields["f,nr"]
    m0 = moments(f, 0.0)
    for t in (4.0, 8.0):
        m = moments(f, t)
        assert abs(m.mean_x - (m0.mean_x + m0.mean_p * t)) < 1e-8
        assert abs(m.mean_p - m0.mean_p) < 1e-10


def test_normalization_is_preserved(fields):
    for t in (0.0, 8.0, 16.0):
        assert abs(norm_at(fields["i,nr"], t) - 1) < 1e-10


def test_width_ordering(fields):
    for t in (0.0, 6.0, 12.0, 20.0):
        assert moments(fields["i,nr"], t).delta_x >= moments(fields["f,G"], t).delta_x


def test_interacting_momentum_peaks_then_relaxes(fields):
    ps = [moments(fields["i,nr"], t).mean_p for t in (0.0, 10.0, 15.0, 20.0, 40.0)]
    assert ps[1] > ps[2] > ps[3] > ps[4] > ps[0] - 1e-6
    # the slow tail leaves the well over tens of seconds; the late-time value
    # approaches the incident mean momentum
    assert abs(ps[4] - ps[0]) < 2e-3


def test_flow_samples(fields):
    samples = flow(fields["i,nr"], np.linspace(-12, -8, 5), 0.0)
    assert all(s.rho >= 0 for s in samples)
    assert all(abs(s.v - s.j / s.rho) < 1e-14 for s in samples)


def test_cdf_limits(fields):
    f = fields["i,nr"]
    assert cdf(f, -100.0, 0.0) == 0.0
    assert cdf(f, 100.0, 0.0) == 1.0
    assert abs(cdf(f, -10.4, 0.0) - 0.5) < 0.1


def test_family_enum_roundtrip():
    for fam in Family:
        assert Family(fam.value) is fam
