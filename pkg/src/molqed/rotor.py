"""Rigid-rotor Stark structure of a diatomic in a DC field along z.

Hamiltonian ``hbar*B*N^2 - mu*E*cos(theta)`` in the |N, m_N> basis. m_N is
conserved, so each sector is a symmetric tridiagonal (Jacobi) matrix with
non-zero off-diagonals for E != 0; its eigenvalues are simple and never cross,
which makes ascending order within a sector identical to the adiabatic label
N = |m_N| + index. :func:`stark_map` still tracks states by eigenvector overlap
and cross-checks that ordering.

Most internal work is dimensionless: energies in units of hbar*B and fields
as ``x = mu*E/(hbar*B)``.
"""

from __future__ import annotations

import csv
import functools
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import optimize
from scipy.optimize import linear_sum_assignment

from .units import CONSTANTS, MoleculeSpec

__all__ = [
    "RotorState",
    "StarkMap",
    "DiagonalizationError",
    "NoSignChangeError",
    "QUBIT_LOWER",
    "QUBIT_UPPER",
    "rotor_basis",
    "cos_theta_matrix",
    "build_hamiltonian",
    "stark_map",
    "state_energy",
    "qubit_splitting",
    "splitting_sensitivity",
    "hellmann_feynman_slope",
    "effective_dipole",
    "find_sweet_spot",
    "linear_regime_field",
    "max_trap_depth",
    "sweet_spot_depth",
    "transition_dipole",
    "truncation_error",
    "richardson_derivative",
]

DEFAULT_N_MAX = 12


class DiagonalizationError(ArithmeticError):
    pass


class NoSignChangeError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class RotorState:
    N: int
    m_N: int

    def __post_init__(self):
        if self.N < 0 or abs(self.m_N) > self.N:
            raise ValueError(f"invalid rotor state N={self.N}, m_N={self.m_N}")

    @property
    def label(self) -> str:
        return f"N{self.N}_m{self.m_N}"


QUBIT_LOWER = RotorState(1, 0)
QUBIT_UPPER = RotorState(2, 0)


def _check_truncation(N_max: int, m_N: int) -> None:
    if int(N_max) != N_max or N_max < 2:
        raise ValueError(f"N_max must be an integer >= 2, got {N_max!r}")
    if abs(m_N) > N_max:
        raise ValueError(f"|m_N|={abs(m_N)} exceeds N_max={N_max}")


def rotor_basis(N_max: int, m_N: int = 0) -> list[RotorState]:
    """States N = |m_N| .. N_max of one m_N sector, ordered by N."""
    _check_truncation(N_max, m_N)
    return [RotorState(N, m_N) for N in range(abs(m_N), N_max + 1)]


def cos_theta_matrix(N_max: int, m_N: int = 0) -> np.ndarray:
    """<N', m|cos(theta)|N, m> on one m_N sector."""
    _check_truncation(N_max, m_N)
    N = np.arange(abs(m_N), N_max, dtype=float)
    off = np.sqrt(((N + 1) ** 2 - m_N**2) / ((2 * N + 1) * (2 * N + 3)))
    return np.diag(off, 1) + np.diag(off, -1)


@functools.lru_cache(maxsize=64)
def _sector_parts(N_max: int, m_N: int) -> tuple[np.ndarray, np.ndarray]:
    N = np.arange(abs(m_N), N_max + 1, dtype=float)
    diag = N * (N + 1)
    cos = cos_theta_matrix(N_max, m_N)
    diag.setflags(write=False)
    cos.setflags(write=False)
    return diag, cos


def _reduced_hamiltonian(x: float, N_max: int, m_N: int) -> np.ndarray:
    diag, cos = _sector_parts(N_max, m_N)
    return np.diag(diag) - x * cos


def build_hamiltonian(mol: MoleculeSpec, E_dc: float, N_max: int = DEFAULT_N_MAX, m_N: int = 0) -> np.ndarray:
    """Rotor + Stark Hamiltonian (J) on the m_N sector, basis :func:`rotor_basis`."""
    _check_truncation(N_max, m_N)
    diag, cos = _sector_parts(N_max, m_N)
    hbar = CONSTANTS.hbar
    return np.diag(hbar * mol.B * diag) - mol.mu * E_dc * cos


def _eigh(x: float, N_max: int, m_N: int, vectors: bool = False):
    if not math.isfinite(x):
        raise DiagonalizationError(f"non-finite field parameter {x!r}")
    h = _reduced_hamiltonian(x, N_max, m_N)
    if vectors:
        return np.linalg.eigh(h)
    return np.linalg.eigvalsh(h)


def _x(mol: MoleculeSpec, E_dc: float) -> float:
    return E_dc / mol.field_scale


def _level_index(state: RotorState, N_max: int) -> int:
    if state.N > N_max:
        raise ValueError(f"state {state} outside truncation N_max={N_max}")
    return state.N - abs(state.m_N)


def _reduced_energy(x: float, state: RotorState, N_max: int) -> float:
    return float(_eigh(x, N_max, state.m_N)[_level_index(state, N_max)])


def state_energy(mol: MoleculeSpec, state: RotorState, E_dc: float, N_max: int = DEFAULT_N_MAX) -> float:
    """Energy (J) of the adiabatically labelled rotor state at field E_dc."""
    return CONSTANTS.hbar * mol.B * _reduced_energy(_x(mol, E_dc), state, N_max)


def _reduced_splitting(x: float, N_max: int) -> float:
    ev = _eigh(x, N_max, 0)
    return float(ev[2] - ev[1])


def qubit_splitting(mol: MoleculeSpec, E_dc: float, N_max: int = DEFAULT_N_MAX) -> float:
    """omega_0 = (E_2 - E_1)/hbar in rad/s for |1>=|1,0>, |2>=|2,0>."""
    if E_dc < 0:
        raise ValueError("E_dc must be non-negative")
    _, e_max = max_trap_depth(mol, N_max)
    if E_dc > 1.5 * e_max:
        raise ValueError(f"E_dc={E_dc:.4g} V/m beyond 1.5*E_max={1.5 * e_max:.4g} V/m")
    return mol.B * _reduced_splitting(_x(mol, E_dc), N_max)


def richardson_derivative(f, x: float, order: int = 1, h0: float = 0.05, atol: float = 1e-10, max_halvings: int = 8) -> float:
    """Central-difference derivative of order 1 or 2 with Richardson extrapolation.

    The step is halved until two successive extrapolated values agree to
    ``atol`` (or ``max_halvings`` is reached, in which case the last value is
    returned).
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")

    def central(h):
        if order == 1:
            return (f(x + h) - f(x - h)) / (2 * h)
        return (f(x + h) - 2 * f(x) + f(x - h)) / (h * h)

    h = h0
    d_h = central(h)
    prev = None
    for _ in range(max_halvings):
        d_half = central(h / 2)
        extrap = (4 * d_half - d_h) / 3
        if prev is not None and abs(extrap - prev) <= atol * max(1.0, abs(extrap)):
            return extrap
        prev, d_h, h = extrap, d_half, h / 2
    return prev


def splitting_sensitivity(mol: MoleculeSpec, E_dc: float, N_max: int = DEFAULT_N_MAX, order: int = 1) -> float:
    """d^k omega_0 / dE^k in rad/s per (V/m)^k, k = ``order``."""
    x = _x(mol, E_dc)
    d = richardson_derivative(lambda s: _reduced_splitting(s, N_max), x, order)
    return mol.B * d / mol.field_scale**order


def hellmann_feynman_slope(mol: MoleculeSpec, state: RotorState, E_dc: float, N_max: int = DEFAULT_N_MAX) -> float:
    """dE_state/dE_dc = <psi|-mu cos(theta)|psi> in J per V/m."""
    _, vecs = _eigh(_x(mol, E_dc), N_max, state.m_N, vectors=True)
    v = vecs[:, _level_index(state, N_max)]
    _, cos = _sector_parts(N_max, state.m_N)
    return -mol.mu * float(v @ cos @ v)


def effective_dipole(mol: MoleculeSpec, state: RotorState, E_dc: float, N_max: int = DEFAULT_N_MAX) -> float:
    """-dE_state/dE_dc (C m) by Richardson finite differences."""
    x = _x(mol, E_dc)
    slope = richardson_derivative(lambda s: _reduced_energy(s, state, N_max), x, 1)
    # reduced slope d(E/hbar B)/dx equals (dE/dE_dc)/mu
    return -mol.mu * slope


def _reduced_splitting_slope(x: float, N_max: int) -> float:
    """d(omega_0/B)/dx from Hellmann-Feynman, smooth and cheap."""
    _, vecs = _eigh(x, N_max, 0, vectors=True)
    _, cos = _sector_parts(N_max, 0)
    v1, v2 = vecs[:, 1], vecs[:, 2]
    return -(v2 @ cos @ v2) + (v1 @ cos @ v1)


@functools.lru_cache(maxsize=32)
def _sweet_x(N_max: int, lo: float, hi: float) -> float:
    f = lambda s: _reduced_splitting_slope(s, N_max)  # noqa: E731
    fa, fb = f(lo), f(hi)
    if fa * fb > 0:
        raise NoSignChangeError(
            f"d(omega_0)/dE has no sign change on [{lo}, {hi}] hbar*B/mu (values {fa:.3g}, {fb:.3g})"
        )
    return optimize.bisect(f, lo, hi, xtol=1e-14, rtol=1e-9)


def find_sweet_spot(mol: MoleculeSpec, N_max: int = DEFAULT_N_MAX, bracket: tuple[float, float] = (0.5, 6.0)) -> float:
    """Field (V/m) where d(omega_0)/dE = 0, by bisection on ``bracket`` x hbar*B/mu."""
    # the reduced problem does not depend on the molecule; only the scale does
    return _sweet_x(N_max, float(bracket[0]), float(bracket[1])) * mol.field_scale


@functools.lru_cache(maxsize=32)
def _linear_x(N_max: int) -> float:
    xs = _sweet_x(N_max, 0.5, 6.0)
    res = optimize.minimize_scalar(
        lambda s: -abs(_reduced_splitting_slope(s, N_max)),
        bounds=(1e-3, xs), method="bounded", options={"xatol": 1e-8},
    )
    return float(res.x)


def linear_regime_field(mol: MoleculeSpec, N_max: int = DEFAULT_N_MAX) -> float:
    """Field below the sweet spot where |d(omega_0)/dE| peaks (V/m).

    Used as the reference point for the linear-Stark-regime sensitivity.
    """
    return _linear_x(N_max) * mol.field_scale


@functools.lru_cache(maxsize=32)
def _max_depth_x(N_max: int) -> tuple[float, float]:
    shift = lambda s: _reduced_energy(s, QUBIT_LOWER, N_max) - 2.0  # noqa: E731
    grid = np.linspace(0.0, 20.0, 401)
    vals = np.array([shift(s) for s in grid])
    i = int(np.argmax(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(lambda s: -shift(s), bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    return float(-res.fun), float(res.x)


def max_trap_depth(mol: MoleculeSpec, N_max: int = DEFAULT_N_MAX) -> tuple[float, float]:
    """(U_max in J, field in V/m) of the largest Stark shift of |1>."""
    u, x = _max_depth_x(N_max)
    return CONSTANTS.hbar * mol.B * u, x * mol.field_scale


def sweet_spot_depth(mol: MoleculeSpec, N_max: int = DEFAULT_N_MAX) -> float:
    """Trap depth (J) left for |1> when the trap bottom sits at the sweet spot."""
    u_max, _ = max_trap_depth(mol, N_max)
    xs = _sweet_x(N_max, 0.5, 6.0)
    shift = _reduced_energy(xs, QUBIT_LOWER, N_max) - 2.0
    return u_max - CONSTANTS.hbar * mol.B * shift


def transition_dipole(mol: MoleculeSpec, E_dc: float, N_max: int = DEFAULT_N_MAX,
                      lower: RotorState = QUBIT_LOWER, upper: RotorState = QUBIT_UPPER) -> float:
    """|<upper| mu cos(theta) |lower>| (C m) between Stark eigenstates."""
    if lower.m_N != upper.m_N:
        raise ValueError("z-polarised transition dipole needs equal m_N")
    _, vecs = _eigh(_x(mol, E_dc), N_max, lower.m_N, vectors=True)
    _, cos = _sector_parts(N_max, lower.m_N)
    a = vecs[:, _level_index(lower, N_max)]
    b = vecs[:, _level_index(upper, N_max)]
    return mol.mu * abs(float(b @ cos @ a))


def truncation_error(mol: MoleculeSpec, E_dc: float, N_max: int = DEFAULT_N_MAX,
                     states=(QUBIT_LOWER, QUBIT_UPPER)) -> float:
    """Largest relative energy change of ``states`` when N_max is doubled."""
    x = _x(mol, E_dc)
    worst = 0.0
    for s in states:
        a = _reduced_energy(x, s, N_max)
        b = _reduced_energy(x, s, 2 * N_max)
        worst = max(worst, abs(a - b) / max(abs(b), 1e-300))
    return worst


@dataclass
class StarkMap:
    """Eigen-decomposition of one m_N sector on a field grid.

    ``energies[i]`` is ascending; ``order[i, k]`` is the column of
    ``energies[i]`` / ``eigenvectors[i]`` carrying tracked label ``labels[k]``.
    """

    field_grid: np.ndarray
    energies: np.ndarray
    eigenvectors: np.ndarray
    labels: list[RotorState]
    order: np.ndarray
    N_max: int
    m_N: int
    min_overlap: float = 1.0

    def energy(self, state: RotorState) -> np.ndarray:
        k = self.labels.index(state)
        return self.energies[np.arange(len(self.field_grid)), self.order[:, k]]

    def vector(self, state: RotorState, i: int) -> np.ndarray:
        k = self.labels.index(state)
        return self.eigenvectors[i][:, self.order[i, k]]

    def to_csv(self, path, states: list[RotorState] | None = None) -> None:
        """field_Vcm then one column per state; energies in h x GHz."""
        states = self.labels if states is None else states
        h = CONSTANTS.h
        cols = [self.energy(s) / h / 1e9 for s in states]
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["field_Vcm"] + [s.label for s in states])
            w.writerow(["V/cm"] + ["GHz"] * len(states))
            for i, f in enumerate(self.field_grid):
                w.writerow([f"{f / 100:.17e}"] + [f"{c[i]:.17e}" for c in cols])


def _match(prev: np.ndarray, new: np.ndarray) -> tuple[np.ndarray, float]:
    """Permutation p with new[:, p[k]] continuing prev[:, k]; and min overlap."""
    ov = np.abs(prev.conj().T @ new)
    rows, cols = linear_sum_assignment(-ov)
    perm = np.empty_like(cols)
    perm[rows] = cols
    return perm, float(ov[rows, cols].min())


def stark_map(mol: MoleculeSpec, field_grid, N_max: int = DEFAULT_N_MAX, m_N: int = 0,
              min_overlap: float = 0.9, max_refine: int = 12) -> StarkMap:
    """Diagonalize the m_N sector on ``field_grid`` (V/m) with adiabatic labels.

    Labels are attached at the first grid point (assumed to be 0 or in the
    weak-field regime) and carried along by maximal eigenvector overlap; when
    the best overlap between neighbours drops below ``min_overlap`` the
    interval is bisected until it does not.
    """
    _check_truncation(N_max, m_N)
    grid = np.asarray(field_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("field_grid must be a non-empty 1-D array")
    if not np.all(np.isfinite(grid)):
        raise DiagonalizationError("field_grid contains non-finite values")
    if np.any(grid < 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("field_grid must be non-negative and strictly increasing")

    scale = mol.field_scale
    hbar_b = CONSTANTS.hbar * mol.B
    labels = rotor_basis(N_max, m_N)
    n = len(labels)

    energies = np.empty((grid.size, n))
    vectors = np.empty((grid.size, n, n))
    order = np.empty((grid.size, n), dtype=int)

    def solve(field):
        w, v = _eigh(field / scale, N_max, m_N, vectors=True)
        if not np.all(np.isfinite(w)):
            raise DiagonalizationError(f"non-finite eigenvalues at E={field!r}")
        return w, v

    w, v = solve(grid[0])
    energies[0], vectors[0] = w * hbar_b, v
    order[0] = np.arange(n)
    tracked = v.copy()  # column k = current vector of label k
    worst = 1.0

    for i in range(1, grid.size):
        w, v = solve(grid[i])
        perm, ov = _match(tracked, v)
        if ov < min_overlap:
            # walk through a refined sub-grid
            perm, ov = _track_refined(tracked, grid[i - 1], grid[i], solve, min_overlap, max_refine)
        worst = min(worst, ov)
        energies[i], vectors[i], order[i] = w * hbar_b, v, perm
        tracked = v[:, perm]
        # fix sign so overlaps stay positive
        signs = np.sign(np.sum(tracked * vectors[i - 1][:, order[i - 1]], axis=0))
        signs[signs == 0] = 1
        tracked = tracked * signs

    return StarkMap(grid, energies, vectors, labels, order, N_max, m_N, worst)


def _track_refined(tracked, a, b, solve, min_overlap, max_refine):
    n_sub = 2
    for _ in range(max_refine):
        cur = tracked.copy()
        worst = 1.0
        perm = None
        for f in np.linspace(a, b, n_sub + 1)[1:]:
            _, v = solve(f)
            perm, ov = _match(cur, v)
            worst = min(worst, ov)
            cur = v[:, perm]
        if worst >= min_overlap:
            return perm, worst
        n_sub *= 2
    warnings.warn(f"state tracking overlap {worst:.3f} < {min_overlap} between {a:.4g} and {b:.4g} V/m")
    return perm, worst
