import logging

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from blowlab.errors import ParameterDomainError, SingularDomainError
from blowlab.params import (kappa_d, kappa_lower_bound, make_params, potential_V, profile_pair,
                            symmetry_modes, u_star)

mp.mp.dps = 50


def mp_kappa0(p):
    p = mp.mpf(p)
    return (2 * (p + 1) / (p - 1) ** 2) ** (1 / (p - 1))


def mp_kappa_d(p, d, y):
    p, d, y = mp.mpf(p), mp.mpf(d), mp.mpf(y)
    s = 2 / (p - 1)
    return mp_kappa0(p) * (1 - d * d) ** (s / 2) / (1 + d * y) ** s


# frozen from mp_kappa0 at 50 digits
KAPPA0_P3 = 1.4142135623730950488
KAPPA0_P5 = 0.93060485910209959894


def test_kappa0_oracle_frozen():
    assert abs(float(mp_kappa0(3)) - KAPPA0_P3) < 1e-18
    assert abs(float(mp_kappa0(5)) - KAPPA0_P5) < 1e-18


def test_base_point_constants():
    P = make_params(N=1, p=3, k=1, R=1, d0=0, omega0=-0.4)
    assert P.s_p == 1.0
    assert P.omega_p == 1.0
    assert_allclose(P.kappa0, KAPPA0_P3, rtol=1e-15)


def test_radial_point_constants():
    P = make_params(N=3, p=5, k=2, R=1, d0=0, omega0=-0.25)
    assert P.s_p == 0.5
    assert P.omega_p == 0.5
    assert_allclose(P.kappa0, KAPPA0_P5, rtol=1e-15)
    assert P.superconformal


def test_cone_radius_violation_named():
    with pytest.raises(ParameterDomainError, match=r"R\*\|d0\| < 1"):
        make_params(N=1, p=3, k=1, R=2, d0=0.8, omega0=-0.4)


@pytest.mark.parametrize("kw, text", [
    ({"p": 1.0}, "p > 1"),
    ({"N": 3, "k": 1, "p": 5}, "k > N/2"),
    ({"R": 0.5}, "R >= 1"),
    ({"d0": 1.0}, r"\|d0\| < 1"),
    ({"omega0": 0.1}, "omega0"),
    ({"omega0": -1.5}, "omega0"),
])
def test_domain_errors(kw, text):
    args = dict(N=1, p=3, k=1, R=1, d0=0)
    args.update(kw)
    with pytest.raises(ParameterDomainError, match=text):
        make_params(**args)


def test_default_omega0_is_window_midpoint():
    P = make_params(N=1, p=3, k=1)
    lo, hi = P.omega_window
    assert lo == -1.0 and hi == 0.0
    assert P.omega0 == -0.5


def test_subconformal_warning(caplog):
    with caplog.at_level(logging.WARNING):
        P = make_params(N=3, p=2, k=2)
    assert not P.superconformal
    assert "superconformal" in caplog.text


@settings(max_examples=50, deadline=None)
@given(st.floats(1.1, 20.0))
def test_kappa0_power_identity(p):
    P = make_params(N=1, p=p, k=1, omega0=-0.5 * min(1.0, 2 / (p - 1)))
    assert abs(P.kappa0 ** (p - 1) * (p - 1) ** 2 / (2 * (p + 1)) - 1.0) <= 1e-14


def test_kappa_d_values():
    P = make_params(N=1, p=3, k=1)
    assert_allclose(kappa_d(0.0, P, 0.6), float(mp_kappa_d(3, 0.6, 0)), rtol=1e-15)
    assert_allclose(kappa_d(0.5, P, 0.6), float(mp_kappa_d(3, 0.6, 0.5)), rtol=1e-15)
    assert_allclose(kappa_d(0.0, P, 0.6), 1.131370849898476, rtol=1e-14)
    assert_allclose(kappa_d(0.5, P, 0.6), 0.870285269152674, rtol=1e-14)
    y = np.linspace(-1, 1, 7)
    assert_allclose(kappa_d(y, P, 0.0), P.kappa0, rtol=0)


def test_kappa_d_singular():
    P = make_params(N=1, p=3, k=1)
    with pytest.raises(SingularDomainError):
        kappa_d(-2.0, P, 0.6)


def test_u_star_values_and_consistency():
    P = make_params(N=1, p=3, k=1)
    assert_allclose(u_star(0.5, 0.3, P, T=1.0), 2 * np.sqrt(2), rtol=1e-15)
    rng = np.random.default_rng(3)
    t = rng.uniform(0, 0.9, 100)
    y = rng.uniform(-1, 1, 100)
    x = y * (1 - t) + 0.2
    val = (1 - t) * u_star(t, x, P, T=1.0, x0=0.2, d=0.4)
    assert np.max(np.abs(val - kappa_d(y, P, 0.4))) <= 1e-12
    ts = 1 - np.logspace(-1, -8, 20)
    vals = u_star(ts, 0.0, P)
    assert np.all(np.diff(vals) > 0)


def test_u_star_singular():
    P = make_params(N=1, p=3, k=1)
    with pytest.raises(SingularDomainError):
        u_star(1.0, 0.0, P)


def test_potential_values():
    P = make_params(N=1, p=3, k=1)
    assert potential_V(0.3, P, 0.0) == pytest.approx(6.0, abs=1e-14)
    assert potential_V(-0.5, P, 0.5) == pytest.approx(8.0, abs=1e-14)
    P5 = make_params(N=1, p=5, k=1)
    assert potential_V(0.7, P5, 0.0) == pytest.approx(1.5 * 2.5, abs=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.floats(1.5, 9.0), st.floats(-0.8, 0.8))
def test_potential_equals_p_kappa_power(p, d):
    P = make_params(N=1, p=p, k=1, omega0=-0.5 * min(1.0, 2 / (p - 1)))
    y = np.cos(np.pi * np.arange(33) / 32)
    V = potential_V(y, P, d)
    assert np.max(np.abs(V - p * kappa_d(y, P, d) ** (p - 1)) / V) <= 1e-12


def test_potential_equals_p_kappa_power_3d():
    P = make_params(N=3, p=5, k=2)
    rng = np.random.default_rng(0)
    y = rng.uniform(-0.57, 0.57, (50, 3))
    d = np.array([0.3, -0.2, 0.4])
    assert_allclose(potential_V(y, P, d), 5 * kappa_d(y, P, d) ** 4, rtol=1e-12)


def test_symmetry_modes_at_zero():
    P = make_params(N=3, p=5, k=2)
    y = np.random.default_rng(1).uniform(-0.5, 0.5, (10, 3))
    modes0, mode1 = symmetry_modes(P, 0.0, y)
    s, k0 = P.s_p, P.kappa0
    assert_allclose(mode1.values[0], s * k0)
    assert_allclose(mode1.values[1], s * (s + 1) * k0)
    for i, m in enumerate(modes0):
        assert_allclose(m.values[0], s * k0 * y[:, i], atol=1e-15)
        assert_allclose(m.values[1], s * (s + 1) * k0 * y[:, i], atol=1e-15)


def test_f1_ratio_identity():
    P = make_params(N=1, p=3, k=1)
    y = np.linspace(-1, 1, 21)
    _, mode1 = symmetry_modes(P, 0.45, y)
    assert_allclose(mode1.values[1], (P.s_p + 1) / (1 + 0.45 * y) * mode1.values[0], rtol=1e-14)


def test_modes_are_parameter_derivatives():
    """f_1 = d/dT of the dilated profile at T=1; f_0 = -d/dd of the profile pair."""
    P = make_params(N=1, p=3, k=1, d0=0.3)
    y = np.linspace(-1, 1, 9)
    modes0, mode1 = symmetry_modes(P, 0.3, y)
    h = 1e-6
    s = P.s_p
    dil = lambda T: np.stack([T**s * profile_pair(T * y, P, 0.3)[0],
                              T**(s + 1) * profile_pair(T * y, P, 0.3)[1]])
    dT = (dil(1 + h) - dil(1 - h)) / (2 * h)
    assert_allclose(dT, mode1.values, atol=1e-8)
    dd = -(profile_pair(y, P, 0.3 + h) - profile_pair(y, P, 0.3 - h)) / (2 * h)
    assert_allclose(dd, modes0[0].values, atol=1e-8)


def test_kappa_lower_bound_is_attained():
    P = make_params(N=1, p=3, k=1, d0=0.3)
    c = kappa_lower_bound(P, 0.2)
    y = np.linspace(-1, 1, 401)
    mins = [kappa_d(y, P, d).min() for d in np.linspace(0.1, 0.5, 41)]
    assert c > 0
    assert min(mins) == pytest.approx(c, rel=1e-12)
    with pytest.raises(ParameterDomainError):
        kappa_lower_bound(P, 0.7)
