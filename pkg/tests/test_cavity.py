import math
import warnings

import numpy as np
import pytest

from molqed import CONSTANTS
from molqed.cavity import (
    LambDickeWarning,
    ResonatorSpec,
    capacitance,
    field_factor,
    lamb_dicke,
    vacuum_rabi,
    zero_point_field,
    zero_point_voltage,
)
from molqed.rotor import find_sweet_spot

TWO_PI = 2 * math.pi
W0 = TWO_PI * 11.3e9


def test_kappa_times_q():
    res = ResonatorSpec(omega=W0, Q=1e6, w=1e-6)
    assert res.kappa * res.Q == res.omega


def test_zero_point_voltage():
    res = ResonatorSpec(omega=W0, Q=1e6, w=1e-6)
    # hand evaluation: sqrt(hbar w / 2C) with C = pi / (2 w Z0)
    C = math.pi / (2 * W0 * 50.0)
    assert capacitance(res) == pytest.approx(C, rel=1e-15)
    assert C == pytest.approx(0.44e-12, rel=0.02)
    assert zero_point_voltage(res) == pytest.approx(math.sqrt(CONSTANTS.hbar * W0 / (2 * C)), rel=1e-14)
    assert zero_point_voltage(res) == pytest.approx(2.9e-6, rel=0.02)
    res4 = ResonatorSpec(omega=4 * W0, Q=1e6, w=1e-6)
    assert zero_point_voltage(res4) == pytest.approx(4 * zero_point_voltage(res), rel=1e-14)


def test_field_factor():
    w = 1e-6
    assert field_factor(w / 4, w) == 1.0
    assert field_factor(w, w) == 0.5
    res = ResonatorSpec(omega=W0, Q=1e6, w=w)
    assert zero_point_field(res, 2 * w) == pytest.approx(zero_point_field(res, w) / 2, rel=1e-15)
    with pytest.raises(ValueError):
        field_factor(0.0, w)


def test_field_continuous():
    w = 1e-6
    z = np.linspace(0.05, 3, 20001) * w
    f = np.array([field_factor(zz, w) for zz in z])
    assert np.max(np.abs(np.diff(f))) < 1e-3


def test_transition_dipole_at_sweet_spot(cabr):
    res = ResonatorSpec(omega=W0, Q=1e6, w=1e-6)
    c = vacuum_rabi(res, cabr, 1e-6, find_sweet_spot(cabr))
    assert 0.35 <= c.wp / cabr.mu <= 0.65
    assert c.wp / cabr.mu == pytest.approx(0.5130, abs=5e-4)
    assert c.g == c.wp * c.E0 / CONSTANTS.hbar


def test_fallback_dipole(cabr):
    res = ResonatorSpec(omega=W0, Q=1e6, w=1e-6)
    assert vacuum_rabi(res, cabr, 1e-6).wp == 0.5 * cabr.mu


def test_coupling_scaling(cabr):
    es = find_sweet_spot(cabr)
    small = vacuum_rabi(ResonatorSpec(W0, 1e6, 1e-7), cabr, 1e-7, es)
    big = vacuum_rabi(ResonatorSpec(W0, 1e6, 1e-6), cabr, 1e-6, es)
    assert small.g == pytest.approx(10 * big.g, rel=1e-12)
    half = vacuum_rabi(ResonatorSpec(W0, 1e6, 1e-6), cabr, 1e-6)
    assert half.g / big.g == pytest.approx(half.wp / big.wp, rel=1e-12)


def test_lamb_dicke(cabr):
    # omega_t giving a0 = 3 nm
    wt = CONSTANTS.hbar / (2 * cabr.mass * (3e-9) ** 2)
    assert wt / TWO_PI == pytest.approx(4.7e6, rel=0.01)
    a0, eta = lamb_dicke(cabr, wt, 100e-9)
    assert a0 == pytest.approx(3e-9, rel=1e-12)
    assert eta == pytest.approx(0.03, rel=1e-12)
    a4, _ = lamb_dicke(cabr, 4 * wt, 100e-9)
    assert a4 == pytest.approx(a0 / 2, rel=1e-12)


def test_lamb_dicke_warning(cabr):
    res = ResonatorSpec(W0, 1e6, 1e-8)
    with pytest.warns(LambDickeWarning):
        vacuum_rabi(res, cabr, 1e-8, omega_t=TWO_PI * 1e5)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        c = vacuum_rabi(ResonatorSpec(W0, 1e6, 1e-7), cabr, 1e-7, omega_t=TWO_PI * 5e6)
    assert 0 < c.eta < 0.3
