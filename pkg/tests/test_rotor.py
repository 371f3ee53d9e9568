import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq

from molqed import CONSTANTS
from molqed.rotor import (
    QUBIT_LOWER,
    QUBIT_UPPER,
    DiagonalizationError,
    NoSignChangeError,
    RotorState,
    build_hamiltonian,
    cos_theta_matrix,
    effective_dipole,
    find_sweet_spot,
    hellmann_feynman_slope,
    linear_regime_field,
    max_trap_depth,
    qubit_splitting,
    rotor_basis,
    splitting_sensitivity,
    stark_map,
    state_energy,
    sweet_spot_depth,
    truncation_error,
)

TWO_PI = 2 * math.pi
VCM = 100.0  # V/m per V/cm
HBAR = CONSTANTS.hbar


def oracle_levels(x, N_max=12, m=0):
    """Independent eigen-solve of the reduced rotor (energies in hbar*B)."""
    N = np.arange(abs(m), N_max + 1)
    off = -x * np.array([math.sqrt(((n + 1) ** 2 - m * m) / ((2 * n + 1) * (2 * n + 3))) for n in N[:-1]])
    return eigh_tridiagonal(N * (N + 1.0), off, eigvals_only=True)


def test_basis_order():
    assert [s.label for s in rotor_basis(3, 1)] == ["N1_m1", "N2_m1", "N3_m1"]
    with pytest.raises(ValueError):
        rotor_basis(1, 0)
    with pytest.raises(ValueError):
        rotor_basis(4, 5)


def test_zero_field_ladder(cabr):
    H = build_hamiltonian(cabr, 0.0, 6, 0)
    assert np.count_nonzero(H - np.diag(np.diag(H))) == 0
    N = np.arange(7)
    assert np.allclose(np.diag(H), HBAR * cabr.B * N * (N + 1), rtol=1e-15)


def test_cos_element():
    assert cos_theta_matrix(4, 0)[0, 1] == pytest.approx(1 / math.sqrt(3), rel=1e-15)


def test_hamiltonian_hermitian(cabr):
    H = build_hamiltonian(cabr, 4e5, 12, 1)
    assert np.array_equal(H, H.T)


def test_against_independent_solver(cabr):
    for E in (0.0, 1e5, 3.8e5, 7e5, 1e6):
        x = E / cabr.field_scale
        ref = oracle_levels(x)
        got = [state_energy(cabr, RotorState(N, 0), E) / (HBAR * cabr.B) for N in range(4)]
        assert np.allclose(got, ref[:4], rtol=1e-12, atol=1e-12)


def test_weak_field_second_order(cabr):
    # second-order shifts: N=1,m=0 -> x^2/10, N=2,m=0 -> x^2/42 (units of hbar*B)
    x = 1e-3
    E = x * cabr.field_scale
    w0 = qubit_splitting(cabr, E) / cabr.B
    assert w0 - 4.0 == pytest.approx(x * x * (1 / 42 - 1 / 10), rel=1e-5)


def test_zero_field_splitting_is_11_3_GHz(cabr):
    w0 = qubit_splitting(cabr, 0.0)
    assert w0 == pytest.approx(4 * cabr.B, rel=1e-15)
    # angular storage: 2pi*11.32 GHz, not 71 Grad/s reported as GHz
    assert w0 / TWO_PI / 1e9 == pytest.approx(11.32, abs=0.005)


def test_splitting_domain(cabr):
    with pytest.raises(ValueError):
        qubit_splitting(cabr, -1.0)
    with pytest.raises(ValueError):
        qubit_splitting(cabr, 5e6)


def test_stark_map_zero_grid(cabr):
    sm = stark_map(cabr, [0.0], N_max=6)
    N = np.arange(7)
    assert np.allclose(sm.energies[0] / (HBAR * cabr.B), N * (N + 1), atol=1e-12)


def test_stark_map_weak_field_seekers(cabr):
    grid = np.linspace(0, 1e6, 101)
    sm = stark_map(cabr, grid)
    for s in (QUBIT_LOWER, QUBIT_UPPER):
        e = sm.energy(s)
        # monotone up to E_max (~6.2 kV/cm), the trapping range
        rng = grid <= 6.0e5
        assert np.all(np.diff(e[rng]) > 0)
    assert sm.min_overlap > 0.9


def test_stark_map_unitary(cabr):
    sm = stark_map(cabr, np.linspace(0, 1e6, 11), m_N=1)
    for V in sm.eigenvectors:
        assert np.abs(V.T @ V - np.eye(len(V))).max() < 1e-10


def test_stark_map_bad_grid(cabr):
    with pytest.raises(ValueError):
        stark_map(cabr, [1.0, 0.5])
    with pytest.raises(DiagonalizationError):
        stark_map(cabr, [0.0, np.nan])


def test_stark_map_csv(cabr, tmp_path):
    sm = stark_map(cabr, [0.0, 1e5])
    p = tmp_path / "map.csv"
    sm.to_csv(p, [QUBIT_LOWER, QUBIT_UPPER])
    rows = p.read_text().splitlines()
    assert rows[0] == "field_Vcm,N1_m0,N2_m0"
    assert float(rows[2].split(",")[1]) == pytest.approx(2 * cabr.B / TWO_PI / 1e9, rel=1e-12)


@given(st.integers(min_value=1, max_value=6), st.floats(min_value=0, max_value=20))
@settings(max_examples=40, deadline=None)
def test_m_sector_symmetry(m, x):
    from molqed.rotor import _eigh

    assert np.allclose(_eigh(x, 8, m), _eigh(x, 8, -m), rtol=0, atol=1e-13)


@given(st.floats(min_value=0, max_value=15))
@settings(max_examples=40, deadline=None)
def test_trace_invariant(x):
    from molqed.rotor import _eigh

    N = np.arange(0, 11)
    assert np.sum(_eigh(x, 10, 0)) == pytest.approx(np.sum(N * (N + 1)), rel=1e-12)


def test_truncation_convergence(cabr):
    x = 7e5 / cabr.field_scale
    a, b = oracle_levels(x, 10), oracle_levels(x, 14)
    assert np.all(np.abs(a[1:3] - b[1:3]) / np.abs(b[1:3]) < 1e-6)
    assert truncation_error(cabr, 1.5 * 6.2e5) < 1e-6


def test_ground_state_stark_shift(cabr):
    # |1> shift near 7 kV/cm is close to the maximum depth of ~0.6 hbar B
    shift = state_energy(cabr, QUBIT_LOWER, 7e5) / (HBAR * cabr.B) - 2.0
    assert shift == pytest.approx(0.6, rel=0.15)
    assert state_energy(cabr, RotorState(0, 0), 7e5) < 0


@pytest.mark.parametrize("E", [1e4, 2e5, 3.8e5, 6e5])
@pytest.mark.parametrize("state", [RotorState(0, 0), QUBIT_LOWER, QUBIT_UPPER, RotorState(1, 1)])
def test_hellmann_feynman(cabr, E, state):
    fd = -effective_dipole(cabr, state, E)
    hf = hellmann_feynman_slope(cabr, state, E)
    assert fd == pytest.approx(hf, rel=1e-4, abs=1e-9 * cabr.mu)


def test_effective_dipole_limits(cabr):
    assert abs(effective_dipole(cabr, QUBIT_LOWER, 0.0)) < 1e-9 * cabr.mu
    # weak-field seeker: energy rises, so -dE/dE < 0
    assert effective_dipole(cabr, QUBIT_LOWER, 2e5) < 0
    # ground state orients toward +mu at large field
    d = [effective_dipole(cabr, RotorState(0, 0), E) for E in (1e6, 5e6, 2e7)]
    assert 0 < d[0] < d[1] < d[2] < cabr.mu
    assert d[2] / cabr.mu > 0.9


def test_sweet_spot(cabr):
    es = find_sweet_spot(cabr)
    assert 3.2e5 <= es <= 4.6e5
    assert es / VCM == pytest.approx(4000, rel=0.15)
    assert es / cabr.field_scale == pytest.approx(3.0, rel=0.05)
    # frozen regression (N_max = 12)
    assert es / cabr.field_scale == pytest.approx(3.0478737221565, rel=1e-8)
    assert qubit_splitting(cabr, es) / TWO_PI == pytest.approx(10611543662.154, rel=1e-9)


def test_sweet_spot_crossing_of_dipoles(cabr):
    # independent root of d1 - d2 using finite-difference dipoles only
    f = lambda E: effective_dipole(cabr, QUBIT_LOWER, E) - effective_dipole(cabr, QUBIT_UPPER, E)  # noqa: E731
    root = brentq(f, 2e5, 5e5, xtol=1e-6)
    assert root == pytest.approx(find_sweet_spot(cabr), rel=1e-6)


def test_sweet_spot_scaling(cabr):
    doubled = cabr.replace(B=2 * cabr.B)
    assert find_sweet_spot(doubled) == pytest.approx(2 * find_sweet_spot(cabr), rel=1e-9)


def test_sweet_spot_bad_bracket(cabr):
    with pytest.raises(NoSignChangeError):
        find_sweet_spot(cabr, bracket=(0.5, 1.0))


def test_sensitivities(cabr):
    lin = abs(splitting_sensitivity(cabr, linear_regime_field(cabr)))
    # 2pi x 200 kHz/(V/cm) within a factor 1.5
    assert 200e3 / 1.5 <= lin / TWO_PI * VCM <= 200e3 * 1.5
    es = find_sweet_spot(cabr)
    assert abs(splitting_sensitivity(cabr, es)) < 1e-3 * lin
    curv = splitting_sensitivity(cabr, es, order=2)
    # second derivative in units mu^2/(hbar^2 B); the quoted 0.1 within a factor 2
    reduced = abs(curv) * HBAR**2 * cabr.B / cabr.mu**2
    assert 0.05 <= reduced <= 0.2


def test_max_trap_depth(cabr):
    u, e = max_trap_depth(cabr)
    assert u / CONSTANTS.k_B == pytest.approx(0.080, rel=0.15)
    assert e / VCM == pytest.approx(7000, rel=0.20)
    assert u / (HBAR * cabr.B) == pytest.approx(0.6, rel=0.1)
    assert sweet_spot_depth(cabr) == pytest.approx(u / 4, rel=0.25)
