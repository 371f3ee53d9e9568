"""Spin-rotation and hyperfine structure of a 2Sigma molecule with one nuclear spin.

Basis: decoupled products |N m_N> |S m_S> |I m_I>, ordered by
(N, m_N, m_S, m_I) ascending. Terms on top of rotor + Stark:

* ``gamma_sr N.S``
* ``b S.I``
* ``c S_z' I_z'`` with z' the internuclear axis, rewritten in the lab frame as
  ``c/3 S.I + c*sqrt(6)/3 sum_q (-1)^q C2_{-q} T2_q(S, I)``
* quadrupole ``eqQ/(4I(2I-1)) * sqrt(6) sum_q (-1)^q C2_{-q} T2_q(I, I)``,
  i.e. ``eqQ/(4I(2I-1)) (3 I_z'^2 - I^2)`` in the molecule frame.

``C^k_q`` are Racah-normalised spherical harmonics of the internuclear axis with
``<N m|C^k_q|N' m'> = (-1)^m sqrt((2N+1)(2N'+1)) (N k N'; -m q m') (N k N'; 0 0 0)``
(Edmonds phases); ``T^2_q(A, B) = sum <1 q1 1 q2|2 q> A_q1 B_q2``.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment
from sympy import Rational
from sympy.physics.wigner import clebsch_gordan, wigner_3j

from . import rotor
from .rotor import DEFAULT_N_MAX, RotorState
from .units import CONSTANTS, MoleculeSpec

__all__ = [
    "SpinBasisState",
    "HyperfineLevel",
    "HyperfineSpectrum",
    "UnsupportedSpinError",
    "LevelTrackingError",
    "spin_basis",
    "angular_momentum_matrices",
    "rotor_tensor",
    "build_spin_hamiltonian",
    "hyperfine_spectrum",
    "level_energy",
    "hyperfine_sensitivity",
    "qubit_transition_frequencies",
    "hyperfine_qubit_detuning",
]


class UnsupportedSpinError(ValueError):
    pass


class LevelTrackingError(RuntimeError):
    pass


def _r(x: float) -> Rational:
    f = Fraction(x).limit_denominator(2)
    return Rational(f.numerator, f.denominator)


@functools.lru_cache(maxsize=None)
def _w3j(j1, j2, j3, m1, m2, m3) -> float:
    return float(wigner_3j(_r(j1), _r(j2), _r(j3), _r(m1), _r(m2), _r(m3)))


@functools.lru_cache(maxsize=None)
def _cg(j1, m1, j2, m2, j, m) -> float:
    return float(clebsch_gordan(_r(j1), _r(j2), _r(j), _r(m1), _r(m2), _r(m)))


def angular_momentum_matrices(j: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(J_z, J_+, J_-) in the |j, m> basis with m ascending."""
    m = np.arange(-j, j + 0.5, 1.0)
    jz = np.diag(m)
    jp = np.zeros((m.size, m.size))
    for i in range(m.size - 1):
        jp[i + 1, i] = math.sqrt(j * (j + 1) - m[i] * (m[i] + 1))
    return jz, jp, jp.T.copy()


def _spherical(jz, jp, jm) -> dict[int, np.ndarray]:
    return {1: -jp / math.sqrt(2), 0: jz, -1: jm / math.sqrt(2)}


def _rank2(a: dict, b: dict, q: int) -> np.ndarray:
    out = 0
    for q1 in (-1, 0, 1):
        q2 = q - q1
        if abs(q2) <= 1:
            out = out + _cg(1, q1, 1, q2, 2, q) * (a[q1] @ b[q2])
    return out


@functools.lru_cache(maxsize=16)
def _rotor_states(N_max: int) -> tuple[RotorState, ...]:
    return tuple(RotorState(N, m) for N in range(N_max + 1) for m in range(-N, N + 1))


@functools.lru_cache(maxsize=64)
def rotor_tensor(N_max: int, k: int, q: int) -> np.ndarray:
    """<N m|C^k_q|N' m'> over all rotor states with N <= N_max."""
    states = _rotor_states(N_max)
    out = np.zeros((len(states), len(states)))
    for i, a in enumerate(states):
        for j, b in enumerate(states):
            if abs(a.N - b.N) > k or a.N + b.N < k or (a.N + k + b.N) % 2 or -a.m_N + q + b.m_N != 0:
                continue
            out[i, j] = (
                (-1) ** a.m_N
                * math.sqrt((2 * a.N + 1) * (2 * b.N + 1))
                * _w3j(a.N, k, b.N, -a.m_N, q, b.m_N)
                * _w3j(a.N, k, b.N, 0, 0, 0)
            )
    out.setflags(write=False)
    return out


@dataclass(frozen=True, order=True)
class SpinBasisState:
    N: int
    m_N: int
    m_S: float
    m_I: float

    @property
    def M(self) -> float:
        return self.m_N + self.m_S + self.m_I


def _check_spins(mol: MoleculeSpec) -> None:
    if mol.S_elec != 0.5:
        raise UnsupportedSpinError(f"{mol.name}: only S = 1/2 is supported, got S = {mol.S_elec}")
    if mol.I_nuc <= 0:
        raise UnsupportedSpinError(f"{mol.name}: a nuclear spin I > 0 is required")
    if mol.I_nuc < 1 and mol.eqQ != 0:
        raise UnsupportedSpinError(f"{mol.name}: quadrupole coupling needs I >= 1")


def _spin_ms(j: float) -> np.ndarray:
    return np.arange(-j, j + 0.5, 1.0)


def spin_basis(mol: MoleculeSpec, N_max: int = DEFAULT_N_MAX) -> list[SpinBasisState]:
    return [
        SpinBasisState(r.N, r.m_N, float(ms), float(mi))
        for r in _rotor_states(N_max)
        for ms in _spin_ms(mol.S_elec)
        for mi in _spin_ms(mol.I_nuc)
    ]


@functools.lru_cache(maxsize=16)
def _operators(mol: MoleculeSpec, N_max: int) -> tuple[np.ndarray, np.ndarray]:
    """(field-independent part, d H / d E_dc) in J and J/(V/m)."""
    _check_spins(mol)
    hbar = CONSTANTS.hbar
    states = _rotor_states(N_max)
    nr = len(states)
    S, I = mol.S_elec, mol.I_nuc
    dS, dI = int(2 * S + 1), int(2 * I + 1)
    eS, eI = np.eye(dS), np.eye(dI)

    Sz, Sp, Sm = (np.kron(x, eI) for x in angular_momentum_matrices(S))
    Iz, Ip, Im = (np.kron(eS, x) for x in angular_momentum_matrices(I))
    s_sph, i_sph = _spherical(Sz, Sp, Sm), _spherical(Iz, Ip, Im)
    s_dot_i = sum((-1) ** q * s_sph[q] @ i_sph[-q] for q in (-1, 0, 1))

    Nz = np.diag([float(r.m_N) for r in states])
    Np = np.zeros((nr, nr))
    index = {r: i for i, r in enumerate(states)}
    for r in states:
        if r.m_N < r.N:
            Np[index[RotorState(r.N, r.m_N + 1)], index[r]] = math.sqrt(r.N * (r.N + 1) - r.m_N * (r.m_N + 1))
    Nm = Np.T

    h_rot = np.diag([r.N * (r.N + 1.0) for r in states])
    n_dot_s = np.kron(Nz, Sz) + 0.5 * (np.kron(Np, Sm) + np.kron(Nm, Sp))
    ns = dS * dI

    def rank2_scalar(a, b):
        return sum((-1) ** q * np.kron(rotor_tensor(N_max, 2, -q), _rank2(a, b, q)) for q in range(-2, 3))

    h0 = hbar * mol.B * np.kron(h_rot, np.eye(ns))
    h0 = h0 + hbar * mol.gamma_sr * n_dot_s
    h0 = h0 + hbar * (mol.b_hf + mol.c_hf / 3) * np.kron(np.eye(nr), s_dot_i)
    if mol.c_hf:
        h0 = h0 + hbar * mol.c_hf * math.sqrt(6) / 3 * rank2_scalar(s_sph, i_sph)
    if mol.eqQ:
        h0 = h0 + hbar * mol.eqQ / (4 * I * (2 * I - 1)) * math.sqrt(6) * rank2_scalar(i_sph, i_sph)
    h0 = 0.5 * (h0 + h0.T)  # all elements are real
    stark = -mol.mu * np.kron(rotor_tensor(N_max, 1, 0), np.eye(ns))
    h0.setflags(write=False)
    stark.setflags(write=False)
    return h0, stark


def build_spin_hamiltonian(mol: MoleculeSpec, E_dc: float, N_max: int = DEFAULT_N_MAX) -> np.ndarray:
    """Full Hamiltonian (J) in the decoupled basis of :func:`spin_basis`."""
    if N_max < 2:
        raise ValueError("N_max must be >= 2")
    h0, stark = _operators(mol, N_max)
    return h0 + E_dc * stark


@functools.lru_cache(maxsize=16)
def _m_blocks(mol: MoleculeSpec, N_max: int) -> dict[float, np.ndarray]:
    blocks: dict[float, list[int]] = {}
    for i, s in enumerate(spin_basis(mol, N_max)):
        blocks.setdefault(s.M, []).append(i)
    return {M: np.array(ix) for M, ix in sorted(blocks.items())}


@functools.lru_cache(maxsize=16)
def _coupled_spin_basis(S: float, I: float) -> tuple[np.ndarray, tuple[tuple[float, float], ...]]:
    """Columns |F3, M_F3> expanded on |m_S>|m_I>; labels in column order."""
    ms, mi = _spin_ms(S), _spin_ms(I)
    cols, labels = [], []
    F = abs(S - I)
    while F <= S + I + 1e-9:
        for MF in np.arange(-F, F + 0.5, 1.0):
            v = np.zeros(ms.size * mi.size)
            for a, s in enumerate(ms):
                for b, i in enumerate(mi):
                    if abs(s + i - MF) < 1e-9:
                        v[a * mi.size + b] = _cg(S, s, I, i, F, MF)
            cols.append(v)
            labels.append((float(F), float(MF)))
        F += 1
    return np.array(cols).T, tuple(labels)


def _rotor_eigenbasis(mol: MoleculeSpec, E_dc: float, N_max: int) -> tuple[np.ndarray, list[RotorState]]:
    """Orthogonal U whose column k is the Stark eigenstate labelled labels[k]."""
    states = _rotor_states(N_max)
    index = {r: i for i, r in enumerate(states)}
    U = np.zeros((len(states), len(states)))
    labels: list[RotorState] = [None] * len(states)  # type: ignore[list-item]
    col = 0
    for m in range(-N_max, N_max + 1):
        _, vecs = rotor._eigh(E_dc / mol.field_scale, N_max, m, vectors=True)
        basis = [index[RotorState(N, m)] for N in range(abs(m), N_max + 1)]
        for k in range(len(basis)):
            U[basis, col] = vecs[:, k]
            labels[col] = RotorState(abs(m) + k, m)
            col += 1
    return U, labels


@dataclass(frozen=True)
class HyperfineLevel:
    energy: float
    N: int
    m_N: int
    F3: float
    M_F3: float
    purity: float
    M: float

    @property
    def label(self) -> tuple[int, int, float, float]:
        return (self.N, self.m_N, self.F3, self.M_F3)


@dataclass
class HyperfineSpectrum:
    E_dc: float
    levels: list[HyperfineLevel]
    basis_size: int

    def manifold(self, N: int, m_N: int) -> list[HyperfineLevel]:
        return [lv for lv in self.levels if lv.N == N and lv.m_N == m_N]

    def find(self, label) -> HyperfineLevel:
        hits = [lv for lv in self.levels if lv.label == tuple(label)]
        if not hits:
            raise LevelTrackingError(f"no level labelled {label}")
        if len(hits) > 1:
            # rotor manifolds are mixed (weak field): labels are not unique
            raise LevelTrackingError(f"label {label} is carried by {len(hits)} levels")
        return hits[0]

    def to_csv(self, path, max_N: int = 2) -> None:
        """energy_MHz relative to each rotor manifold's mean, with labels."""
        rows = []
        groups: dict[tuple[int, int], list[HyperfineLevel]] = {}
        for lv in self.levels:
            if lv.N <= max_N:
                groups.setdefault((lv.N, lv.m_N), []).append(lv)
        h = CONSTANTS.h
        for key in sorted(groups):
            lvls = groups[key]
            mean = sum(lv.energy for lv in lvls) / len(lvls)
            for lv in sorted(lvls, key=lambda x: x.energy):
                rows.append([f"{(lv.energy - mean) / h / 1e6:.17e}", lv.N, lv.m_N, f"{lv.F3:g}", f"{lv.M_F3:g}", f"{lv.purity:.17e}"])
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["energy_MHz", "N", "m_N", "F3", "MF3", "purity"])
            w.writerow(["MHz", "", "", "", "", "1"])
            w.writerows(rows)


def _label_block(mol, vecs, idx, U, rlabels, W, slabels, n_spin) -> list[tuple]:
    """Dominant (rotor label, spin label, purity) per eigenvector column."""
    nr = U.shape[0]
    out = []
    full = np.zeros(nr * n_spin)
    for k in range(vecs.shape[1]):
        full[:] = 0.0
        full[idx] = vecs[:, k]
        amp = U.T @ full.reshape(nr, n_spin) @ W
        w2 = amp**2
        r, s = np.unravel_index(int(np.argmax(w2)), w2.shape)
        out.append((r, s, float(w2[r, s]), w2.sum(axis=1), w2.sum(axis=0)))
    return out


def hyperfine_spectrum(mol: MoleculeSpec, E_dc: float, N_max: int = DEFAULT_N_MAX,
                       blocks=None) -> HyperfineSpectrum:
    """Diagonalize per total-M block and attach dominant (N, m_N, F3, M_F3) labels.

    Within each rotor manifold the spin labels are assigned one-to-one by
    maximum summed weight, so every manifold carries each (F3, M_F3) once.
    ``blocks`` optionally restricts to a subset of total-M values.
    """
    h = build_spin_hamiltonian(mol, E_dc, N_max)
    U, rlabels = _rotor_eigenbasis(mol, E_dc, N_max)
    W, slabels = _coupled_spin_basis(mol.S_elec, mol.I_nuc)
    n_spin = W.shape[0]
    all_blocks = _m_blocks(mol, N_max)
    keys = list(all_blocks) if blocks is None else [float(b) for b in blocks]

    raw = []  # (energy, M, rotor idx, spin weights, rotor-spin purity)
    for M in keys:
        idx = all_blocks[M]
        w, v = np.linalg.eigh(h[np.ix_(idx, idx)])
        if not np.all(np.isfinite(w)):
            raise rotor.DiagonalizationError(f"non-finite hyperfine eigenvalues at E={E_dc!r}")
        for e, (r, s, pur, rw, sw) in zip(w, _label_block(mol, v, idx, U, rlabels, W, slabels, n_spin)):
            raw.append((float(e), M, int(np.argmax(rw)), sw, pur))

    levels: list[HyperfineLevel] = []
    by_rotor: dict[int, list[int]] = {}
    for i, item in enumerate(raw):
        by_rotor.setdefault(item[2], []).append(i)
    for r, members in by_rotor.items():
        weights = np.array([raw[i][3] for i in members])
        rows, cols = linear_sum_assignment(-weights)
        spin_of = dict(zip(rows, cols))
        # crowded groups (strong mixing near the truncation edge) keep their dominant label
        for row in range(len(members)):
            spin_of.setdefault(row, int(np.argmax(weights[row])))
        for row, col in sorted(spin_of.items()):
            e, M, _, sw, pur = raw[members[row]]
            F3, MF3 = slabels[col]
            lab = rlabels[r]
            levels.append(HyperfineLevel(e, lab.N, lab.m_N, F3, MF3, pur, M))
    levels.sort(key=lambda lv: (lv.energy, lv.label))
    return HyperfineSpectrum(E_dc, levels, h.shape[0])


def _block_for(label) -> float:
    N, m_N, F3, MF3 = label
    return float(m_N + MF3)


def level_energy(mol: MoleculeSpec, label, E_dc: float, N_max: int = DEFAULT_N_MAX,
                 min_purity: float = 0.5) -> float:
    """Energy (J) of the level labelled (N, m_N, F3, M_F3) at E_dc."""
    spec = hyperfine_spectrum(mol, E_dc, N_max, blocks=[_block_for(label)])
    try:
        lv = spec.find(label)
    except LevelTrackingError as exc:
        raise LevelTrackingError(f"level {label} not trackable at E={E_dc:.6g} V/m: {exc}") from None
    if lv.purity < min_purity:
        raise LevelTrackingError(
            f"level {label} at E={E_dc:.6g} V/m has purity {lv.purity:.3f} < {min_purity}; "
            "labels are not trackable here"
        )
    return lv.energy


def hyperfine_sensitivity(mol: MoleculeSpec, level_pair, E_dc: float, N_max: int = DEFAULT_N_MAX) -> float:
    """d(omega)/dE (rad/s per V/m) of the transition between two labelled levels."""
    a, b = (tuple(x) for x in level_pair)
    if a == b:
        return 0.0
    hbar = CONSTANTS.hbar
    scale = mol.field_scale

    def omega(x):
        E = x * scale
        return (level_energy(mol, b, E, N_max) - level_energy(mol, a, E, N_max)) / (hbar * mol.B)

    d = rotor.richardson_derivative(omega, E_dc / scale, 1, h0=0.02, atol=1e-12)
    return mol.B * d / scale


def qubit_transition_frequencies(mol: MoleculeSpec, E_dc: float, N_max: int = DEFAULT_N_MAX,
                                 lower=(1, 0), upper=(2, 0)) -> dict[tuple[float, float], float]:
    """omega (rad/s) of |lower; F3, M_F3> -> |upper; F3, M_F3> for every spin label."""
    f_max = mol.S_elec + mol.I_nuc
    blocks = sorted({float(m + mf) for m in (lower[1], upper[1]) for mf in np.arange(-f_max, f_max + 0.5)})
    spec = hyperfine_spectrum(mol, E_dc, N_max, blocks=blocks)
    lo = {(lv.F3, lv.M_F3): lv.energy for lv in spec.manifold(*lower)}
    hi = {(lv.F3, lv.M_F3): lv.energy for lv in spec.manifold(*upper)}
    return {k: (hi[k] - lo[k]) / CONSTANTS.hbar for k in sorted(lo) if k in hi}


def hyperfine_qubit_detuning(mol: MoleculeSpec, E_dc: float, N_max: int = DEFAULT_N_MAX) -> float:
    """|omega(F3_max, 0) - omega(F3_min, 0)|: rotational-qubit frequency difference between
    the two M_F3 = 0 hyperfine states (rad/s)."""
    freqs = qubit_transition_frequencies(mol, E_dc, N_max)
    F_hi, F_lo = mol.S_elec + mol.I_nuc, abs(mol.S_elec - mol.I_nuc)
    return abs(freqs[(float(F_hi), 0.0)] - freqs[(float(F_lo), 0.0)])
