"""Electrostatic microtrap characterization.

The trapping potential of a rotor state is its exact Stark energy at the local
field magnitude, U(r) = E_state(|E(r)|) - E_state(0). Weak-field seekers sit at
a minimum of |E|; the Z-shaped electrode pair leaves a non-zero field there.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import optimize

from .electrostatics import (
    ChargeSolution,
    Segment,
    TrapGeometry,
    field_at,
    inside_electrode,
    solve_charges,
)
from .rotor import DEFAULT_N_MAX, QUBIT_LOWER, QUBIT_UPPER, RotorState, _level_index, _sector_parts, max_trap_depth
from .units import CONSTANTS, MoleculeSpec

__all__ = [
    "TrapCharacterization",
    "NoMinimumError",
    "TrapDestroyedError",
    "VdwCorrection",
    "stark_potential",
    "trap_potential",
    "characterize_trap",
    "vdw_c3",
    "vdw_correction",
    "vdw_depths",
    "loading_phase_space_target",
    "ez_trap_geometry",
    "export_field_map",
]


class NoMinimumError(RuntimeError):
    pass


class TrapDestroyedError(ValueError):
    pass


def stark_potential(mol: MoleculeSpec, E_mag, state: RotorState = QUBIT_LOWER, N_max: int = DEFAULT_N_MAX) -> np.ndarray:
    """Stark shift (J) of ``state`` for an array of field magnitudes (V/m)."""
    E_mag = np.asarray(E_mag, float)
    x = np.abs(E_mag.ravel()) / mol.field_scale
    diag, cos = _sector_parts(N_max, state.m_N)
    h = np.diag(diag)[None, :, :] - x[:, None, None] * cos[None, :, :]
    i = _level_index(state, N_max)
    shift = np.linalg.eigvalsh(h)[:, i] - state.N * (state.N + 1)
    return (CONSTANTS.hbar * mol.B * shift).reshape(E_mag.shape)


def trap_potential(geom: TrapGeometry, sol: ChargeSolution, mol: MoleculeSpec, r,
                   state: RotorState = QUBIT_LOWER, N_max: int = DEFAULT_N_MAX) -> np.ndarray:
    """U(r) in J; points inside electrodes give +inf, points below the chip give nan."""
    pts = np.atleast_2d(np.asarray(r, float))
    out = np.full(len(pts), np.nan)
    bad = inside_electrode(geom, pts)
    ok = ~bad & (pts[:, 2] > 0)
    if np.any(ok):
        E = field_at(geom, sol, pts[ok], check=False)
        out[ok] = stark_potential(mol, np.linalg.norm(E, axis=1), state, N_max)
    out[bad] = np.inf
    return out if np.ndim(r) > 1 else float(out[0])


def vdw_c3(mol: MoleculeSpec) -> float:
    """C3 (J m^3) of the dipole-image attraction U(z) = -C3/z^3 above a conductor."""
    return mol.mu**2 / (32.0 * math.pi * CONSTANTS.epsilon_0)


class VdwCorrection(NamedTuple):
    omega_t_prime: float
    depth_reduction: float
    C3: float


def vdw_depths(z0: float, omega_t: float, mol: MoleculeSpec) -> tuple[float, float]:
    """(surface-limited harmonic depth, depth with the image attraction), in J.

    The harmonic well 0.5 m w^2 (z - z0)^2 is cut off by the surface at z = 0;
    adding -C3/z^3 creates a barrier at z_b < z0 that sets the depth instead.
    """
    if z0 <= 0 or omega_t <= 0:
        raise ValueError("z0 and omega_t must be positive")
    k = mol.mass * omega_t**2
    C3 = vdw_c3(mol)
    U = lambda z: 0.5 * k * (z - z0) ** 2 - C3 / z**3  # noqa: E731
    dU = lambda z: k * (z - z0) + 3.0 * C3 / z**4  # noqa: E731
    # dU is smallest at z_star, where d2U/dz2 = 0; a surviving well needs dU(z_star) < 0,
    # which brackets the barrier z_b below z_star and the minimum z_m above it.
    z_star = (12.0 * C3 / k) ** 0.2
    if dU(z_star) >= 0:
        raise TrapDestroyedError(f"image attraction removes the well at z0={z0:.3g} m")
    z_b = optimize.brentq(dU, z_star * 1e-3, z_star, xtol=1e-18)
    z_m = optimize.brentq(dU, z_star, z0 + 1e3 * z0, xtol=1e-18)
    return 0.5 * k * z0**2, U(z_b) - U(z_m)


def vdw_correction(z0: float, omega_t: float, mol: MoleculeSpec) -> VdwCorrection:
    """Trap frequency and depth change from the image-dipole attraction at height z0."""
    if z0 <= 0:
        raise ValueError("z0 must be positive")
    C3 = vdw_c3(mol)
    w2 = omega_t**2 - 12.0 * C3 / (mol.mass * z0**5)
    if w2 <= 0:
        raise TrapDestroyedError(f"omega_t'^2 = {w2:.3g} <= 0 at z0={z0:.3g} m")
    bare, with_vdw = vdw_depths(z0, omega_t, mol)
    return VdwCorrection(math.sqrt(w2), bare - with_vdw, C3)


def loading_phase_space_target(w: float, U0: float) -> float:
    """w^-3 (U0/k_B)^-3/2 with w in cm and U0/k_B in K."""
    if w <= 0 or U0 <= 0:
        raise ValueError("w and U0 must be positive")
    return (w * 100.0) ** -3 * (U0 / CONSTANTS.k_B) ** -1.5


@dataclass
class TrapCharacterization:
    r0: np.ndarray
    E_off: float
    depth: float
    omega_t: np.ndarray
    omega_t_state2: np.ndarray
    vdw_shift: float
    depth_vdw: float
    axes: np.ndarray = field(repr=False)
    barriers: dict = field(default_factory=dict, repr=False)
    # depth / (0.1 mu E_max): how far this geometry is from the rough 0.1 scaling
    depth_scaling_ratio: float = float("nan")

    def summary(self) -> dict:
        kb = CONSTANTS.k_B
        return {
            "r0_um": tuple(float(v) * 1e6 for v in self.r0),
            "E_off_V_per_cm": self.E_off / 100.0,
            "depth_mK": self.depth / kb * 1e3,
            "depth_vdw_mK": self.depth_vdw / kb * 1e3,
            "omega_t_MHz": tuple(float(v) / (2 * math.pi) / 1e6 for v in self.omega_t),
            "omega_t_state2_MHz": tuple(float(v) / (2 * math.pi) / 1e6 for v in self.omega_t_state2),
            "vdw_shift": self.vdw_shift,
            "depth_scaling_ratio": self.depth_scaling_ratio,
        }


def _search_box(geom: TrapGeometry) -> np.ndarray:
    pts = np.array([p for s in geom.electrodes for p in (s.start, s.end)], float)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    w = geom.w
    return np.array([[lo[0], hi[0]], [lo[1], hi[1]], [0.2 * w, hi[2] + 3.0 * w]])


def _grid_candidates(U_grid: np.ndarray) -> list[tuple[int, int, int]]:
    """Interior grid points not higher than any of their 26 neighbours."""
    g = np.where(np.isfinite(U_grid), U_grid, -np.inf)
    core = g[1:-1, 1:-1, 1:-1]
    is_min = np.isfinite(core)
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            for dz in (-1, 0, 1):
                if dx == dy == dz == 0:
                    continue
                nb = g[1 + dx : g.shape[0] - 1 + dx, 1 + dy : g.shape[1] - 1 + dy, 1 + dz : g.shape[2] - 1 + dz]
                is_min &= core <= nb
    idx = np.argwhere(is_min) + 1
    return sorted(map(tuple, idx), key=lambda i: U_grid[i])


def hessian(f, r0: np.ndarray, h: float) -> np.ndarray:
    """Central-difference Hessian of scalar f at r0 with step h."""
    H = np.zeros((3, 3))
    e = np.eye(3) * h
    f0 = f(r0)
    for i in range(3):
        H[i, i] = (f(r0 + e[i]) - 2 * f0 + f(r0 - e[i])) / h**2
        for j in range(i + 1, 3):
            H[i, j] = H[j, i] = (
                f(r0 + e[i] + e[j]) - f(r0 + e[i] - e[j]) - f(r0 - e[i] + e[j]) + f(r0 - e[i] - e[j])
            ) / (4 * h**2)
    return H


def _ray_barrier(U, r0: np.ndarray, d: np.ndarray, reach: float, n: int = 400) -> tuple[float, np.ndarray]:
    t = np.linspace(0.0, reach, n + 1)
    pts = r0[None, :] + t[:, None] * d[None, :]
    vals = U(pts)
    # stop at the surface (nan) or at an electrode (inf)
    stop = np.flatnonzero(~np.isfinite(vals))
    end = stop[0] if len(stop) else len(vals)
    return float(np.max(vals[:end]) - vals[0]), vals[:end]


def characterize_trap(geom: TrapGeometry, mol: MoleculeSpec, N_max: int = DEFAULT_N_MAX,
                      grid_points: int = 17, vdw: bool = True) -> TrapCharacterization:
    """Locate the trap minimum of |1> and measure frequencies and depth."""
    sol = solve_charges(geom)
    w = geom.w
    U1 = lambda p: trap_potential(geom, sol, mol, p, QUBIT_LOWER, N_max)  # noqa: E731
    U2 = lambda p: trap_potential(geom, sol, mol, p, QUBIT_UPPER, N_max)  # noqa: E731

    box = _search_box(geom)
    axes_1d = [np.linspace(lo, hi, grid_points) for lo, hi in box]
    X, Y, Z = np.meshgrid(*axes_1d, indexing="ij")
    U_grid = U1(np.c_[X.ravel(), Y.ravel(), Z.ravel()]).reshape(X.shape)
    cands = _grid_candidates(U_grid)
    if not cands:
        raise NoMinimumError("grid scan found no interior local minimum of the trap potential")

    def objective(s):
        v = U1(s * w)
        return v / CONSTANTS.k_B if np.isfinite(v) else 1e30

    best = None
    for c in cands[:5]:
        start = np.array([X[c], Y[c], Z[c]]) / w
        res = optimize.minimize(objective, start, method="Nelder-Mead",
                                options={"xatol": 1e-7, "fatol": 1e-16, "maxiter": 4000})
        inside_box = np.all((res.x * w >= box[:, 0]) & (res.x * w <= box[:, 1]))
        if inside_box and (best is None or res.fun < best.fun):
            best = res
    if best is None:
        raise NoMinimumError("trap minimum search left the search region")
    r0 = best.x * w

    h = 5e-3 * w
    H1 = hessian(U1, r0, h)
    ev1, vecs = np.linalg.eigh(H1)
    if np.any(ev1 <= 0):
        raise NoMinimumError(f"stationary point at {r0} is not a minimum (Hessian eigenvalues {ev1})")
    omega1 = np.sqrt(ev1 / mol.mass)
    H2 = hessian(U2, r0, h)
    ev2 = np.einsum("ij,jk,ki->i", vecs.T, H2, vecs)
    omega2 = np.sign(ev2) * np.sqrt(np.abs(ev2) / mol.mass)

    E_off = float(np.linalg.norm(field_at(geom, sol, r0)))

    reach = float(np.max(box[:, 1] - box[:, 0]))
    dirs = {
        "+x": np.array([1.0, 0, 0]), "-x": np.array([-1.0, 0, 0]),
        "+y": np.array([0, 1.0, 0]), "-y": np.array([0, -1.0, 0]),
        "+z": np.array([0, 0, 1.0]), "-z": np.array([0, 0, -1.0]),
    }
    for k in range(3):
        dirs[f"+a{k}"] = vecs[:, k]
        dirs[f"-a{k}"] = -vecs[:, k]
    barriers = {name: _ray_barrier(U1, r0, d, reach)[0] for name, d in dirs.items()}
    depth = min(barriers.values())

    # surface direction with the image attraction added
    iz = int(np.argmax(np.abs(vecs[2])))
    C3 = vdw_c3(mol)
    if vdw:
        t = np.linspace(0.0, r0[2], 2001)[:-1]
        pts = r0[None, :] - t[:, None] * np.array([0, 0, 1.0])
        vals = U1(pts) - C3 / pts[:, 2] ** 3
        stop = np.flatnonzero(~np.isfinite(vals))
        vals = vals[: stop[0]] if len(stop) else vals
        k = int(np.argmax(vals))
        surface = float(vals[k] - np.min(vals[: k + 1]))
        others = [b for name, b in barriers.items() if name != "-z"]
        depth_vdw = min(min(others), surface)
        try:
            corr = vdw_correction(r0[2], omega1[iz], mol)
            vdw_shift = corr.omega_t_prime / omega1[iz] - 1.0
        except TrapDestroyedError:
            vdw_shift, depth_vdw = -1.0, 0.0
    else:
        depth_vdw, vdw_shift = depth, 0.0

    u_max, e_max = max_trap_depth(mol, N_max)
    ratio = depth / (0.1 * mol.mu * e_max)
    return TrapCharacterization(r0, E_off, depth, omega1, omega2, float(vdw_shift), float(depth_vdw),
                                vecs, barriers, float(ratio))


def ez_trap_geometry(w: float = 1e-7, V: float = 0.1, offset_field: float = 3.8335e5,
                     height: float | None = None, length: float = 4.0, leg: float = 0.35,
                     radius: float = 0.02, n_sub: int = 12) -> TrapGeometry:
    """Z-shaped two-wire trap with a calibrated bias field.

    Two parallel wires at +V and -V run along x at y = +-w/2 on the chip
    (z = 0), each bent by ``leg * w`` toward the other at opposite ends.
    ``length`` and ``radius`` are in units of w. The bias cancels the
    transverse field at (0, 0, height) and sets the field magnitude there to
    ``offset_field`` along -x, which places the trap near that point.
    """
    height = w if height is None else height
    L, a, dl = 0.5 * length * w, radius * w, leg * w
    electrodes = (
        Segment((-L, w / 2, 0.0), (L, w / 2, 0.0), V, a),
        Segment((L, w / 2, 0.0), (L, w / 2 - dl, 0.0), V, a),
        Segment((-L, -w / 2, 0.0), (L, -w / 2, 0.0), -V, a),
        Segment((-L, -w / 2, 0.0), (-L, -w / 2 + dl, 0.0), -V, a),
    )
    bare = TrapGeometry(electrodes, (0.0, 0.0, 0.0), False, w, n_sub)
    E_int = field_at(bare, solve_charges(bare), np.array([0.0, 0.0, height]))
    bias = np.array([-offset_field, 0.0, 0.0]) - E_int
    return TrapGeometry(electrodes, tuple(bias), False, w, n_sub)


def export_field_map(path, geom: TrapGeometry, mol: MoleculeSpec, xs, ys, zs,
                     N_max: int = DEFAULT_N_MAX) -> int:
    """Write field and |1> potential on a grid to CSV; returns the row count."""
    sol = solve_charges(geom)
    X, Y, Z = np.meshgrid(np.asarray(xs, float), np.asarray(ys, float), np.asarray(zs, float), indexing="ij")
    pts = np.c_[X.ravel(), Y.ravel(), Z.ravel()]
    bad = inside_electrode(geom, pts)
    E = np.full_like(pts, np.nan)
    if np.any(~bad):
        E[~bad] = field_at(geom, sol, pts[~bad], check=False)
    mag = np.linalg.norm(E, axis=1)
    U = np.full(len(pts), np.nan)
    U[~bad] = stark_potential(mol, mag[~bad], QUBIT_LOWER, N_max)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x", "y", "z", "Ex", "Ey", "Ez", "E_mag", "U1"])
        wr.writerow(["um", "um", "um", "V/cm", "V/cm", "V/cm", "V/cm", "mK"])
        for p, e, m, u in zip(pts, E, mag, U):
            wr.writerow([f"{v:.17e}" for v in (*(p * 1e6), *(e / 100), m / 100, u / CONSTANTS.k_B * 1e3)])
    return len(pts)
