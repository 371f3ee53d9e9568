"""Thin-wire electrostatics by line-charge collocation.

Each electrode is a straight segment of radius ``a`` held at a fixed voltage,
split into pieces (``n_sub`` per length ``w``) of uniform line charge. The charges are fixed by
requiring the potential on each piece's surface (averaged over four points
around the midpoint at distance ``a``) to equal the electrode voltage. A grounded plane at z = 0 is modelled
with image pieces of opposite charge. The bias field is a uniform external
field superposed on the result; it does not enter the collocation (wires are
thin, so the charge it would induce is negligible).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg

from .units import CONSTANTS

__all__ = [
    "Segment",
    "TrapGeometry",
    "ChargeSolution",
    "InsideElectrodeError",
    "SingularGeometryError",
    "solve_charges",
    "potential_at",
    "field_at",
    "segment_potential",
    "segment_field",
    "inside_electrode",
]

_K = 1.0 / (4.0 * np.pi * CONSTANTS.epsilon_0)


class InsideElectrodeError(ValueError):
    pass


class SingularGeometryError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class Segment:
    start: tuple[float, float, float]
    end: tuple[float, float, float]
    voltage: float
    radius: float

    def __post_init__(self):
        a, b = np.asarray(self.start, float), np.asarray(self.end, float)
        if a.shape != (3,) or b.shape != (3,):
            raise ValueError("segment endpoints must be 3-vectors")
        length = float(np.linalg.norm(b - a))
        if length <= 0 or self.radius <= 0:
            raise ValueError("segment needs positive length and radius")
        if self.radius > 0.2 * length:
            raise ValueError(f"wire radius {self.radius:g} m is not << segment length {length:g} m")
        if min(a[2], b[2]) < 0:
            raise ValueError("electrodes must lie in the z >= 0 half-space")

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.subtract(self.end, self.start)))


@dataclass(frozen=True)
class TrapGeometry:
    electrodes: tuple[Segment, ...]
    bias_field: tuple[float, float, float] = (0.0, 0.0, 0.0)
    ground_plane: bool = False
    w: float = 1e-7
    # collocation pieces per length w (at least two per segment)
    n_sub: int = 12

    def __post_init__(self):
        object.__setattr__(self, "electrodes", tuple(self.electrodes))
        object.__setattr__(self, "bias_field", tuple(float(x) for x in self.bias_field))

    def scaled(self, length: float = 1.0, voltage: float = 1.0) -> "TrapGeometry":
        """Copy with lengths times ``length`` and voltages times ``voltage``."""
        segs = tuple(
            Segment(tuple(np.multiply(s.start, length)), tuple(np.multiply(s.end, length)),
                    s.voltage * voltage, s.radius * length)
            for s in self.electrodes
        )
        bias = tuple(np.multiply(self.bias_field, voltage / length))
        return replace(self, electrodes=segs, bias_field=bias, w=self.w * length)

    def with_voltages(self, factor: float) -> "TrapGeometry":
        return self.scaled(1.0, factor)


@dataclass
class ChargeSolution:
    """Piecewise-constant line charges (C/m) on all electrode pieces."""

    starts: np.ndarray
    ends: np.ndarray
    lam: np.ndarray
    owner: np.ndarray
    ground_plane: bool
    bias_field: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def per_electrode(self) -> list[np.ndarray]:
        return [self.lam[self.owner == k] for k in range(int(self.owner.max()) + 1)]


def _pieces(geom: TrapGeometry):
    starts, ends, owner = [], [], []
    for k, s in enumerate(geom.electrodes):
        a, b = np.asarray(s.start, float), np.asarray(s.end, float)
        n = max(2, int(np.ceil(geom.n_sub * s.length / geom.w - 1e-9)))
        t = np.linspace(0.0, 1.0, n + 1)
        pts = a + np.outer(t, b - a)
        starts.append(pts[:-1])
        ends.append(pts[1:])
        owner += [k] * n
    return np.vstack(starts), np.vstack(ends), np.array(owner)


def _perpendicular(u: np.ndarray) -> np.ndarray:
    ref = np.array([0.0, 0.0, 1.0]) if abs(u[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    n = np.cross(u, ref)
    return n / np.linalg.norm(n)


def _geometry(points: np.ndarray, starts: np.ndarray, ends: np.ndarray):
    """Broadcast helpers: points (P,3) against pieces (S,3)."""
    d = ends - starts
    L = np.linalg.norm(d, axis=1)
    u = d / L[:, None]
    pa = points[:, None, :] - starts[None, :, :]
    pb = points[:, None, :] - ends[None, :, :]
    ra = np.linalg.norm(pa, axis=2)
    rb = np.linalg.norm(pb, axis=2)
    za = np.einsum("psk,sk->ps", pa, u)
    zb = za - L[None, :]
    return u, L, pa, ra, rb, za, zb


def _chunked(fn, points, starts, ends):
    """Apply fn over blocks of points to bound the (P, S, 3) temporaries."""
    points = np.atleast_2d(np.asarray(points, float))
    step = max(1, 2_000_000 // max(1, len(starts)))
    if len(points) <= step:
        return fn(points, starts, ends)
    return np.concatenate([fn(points[i : i + step], starts, ends) for i in range(0, len(points), step)])


def _potential_block(points, starts, ends):
    _, L, _, ra, rb, _, _ = _geometry(points, starts, ends)
    s = ra + rb
    # s - L rewritten to avoid cancellation near the axis
    diff = (s * s - L[None, :] ** 2) / (s + L[None, :])
    return _K * np.log((s + L[None, :]) / diff)


def _field_block(points, starts, ends):
    u, L, pa, ra, rb, za, zb = _geometry(points, starts, ends)
    axial = 1.0 / rb - 1.0 / ra
    rho_vec = pa - za[..., None] * u[None, :, :]
    rho2 = np.einsum("psk,psk->ps", rho_vec, rho_vec)
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = (za / ra - zb / rb) / rho2
    # on the axis extension: z/r = sign(z)(1 - rho^2/2z^2 + ...)
    near = rho2 < 1e-12 * (L[None, :] ** 2)
    if np.any(near):
        series = 0.5 * (np.sign(zb) / zb**2 - np.sign(za) / za**2)
        coef = np.where(near, series, coef)
    return _K * (axial[..., None] * u[None, :, :] + coef[..., None] * rho_vec)


def segment_potential(points, starts, ends) -> np.ndarray:
    """Potential per unit line charge, shape (P, S): K ln((ra+rb+L)/(ra+rb-L))."""
    return _chunked(_potential_block, points, starts, ends)


def segment_field(points, starts, ends) -> np.ndarray:
    """Field per unit line charge, shape (P, S, 3)."""
    return _chunked(_field_block, points, starts, ends)


def _field_sum(points, starts, ends, lam):
    step = max(1, 2_000_000 // max(1, len(starts)))
    out = np.empty((len(points), 3))
    for i in range(0, len(points), step):
        out[i : i + step] = np.einsum("psk,s->pk", _field_block(points[i : i + step], starts, ends), lam)
    return out


def _all_pieces(sol: ChargeSolution):
    if not sol.ground_plane:
        return sol.starts, sol.ends, sol.lam
    flip = np.array([1.0, 1.0, -1.0])
    return (
        np.vstack([sol.starts, sol.starts * flip]),
        np.vstack([sol.ends, sol.ends * flip]),
        np.concatenate([sol.lam, -sol.lam]),
    )


def solve_charges(geom: TrapGeometry) -> ChargeSolution:
    if not geom.electrodes:
        raise ValueError("geometry has no electrodes")
    if geom.ground_plane and any(min(s.start[2], s.end[2]) <= s.radius for s in geom.electrodes):
        raise ValueError("with a ground plane every electrode must sit more than its radius above z = 0")
    starts, ends, owner = _pieces(geom)
    radii = np.array([geom.electrodes[k].radius for k in owner])
    u = (ends - starts) / np.linalg.norm(ends - starts, axis=1)[:, None]
    n1 = np.array([_perpendicular(v) for v in u])
    n2 = np.cross(u, n1)
    mid = 0.5 * (starts + ends)
    flip = np.array([1.0, 1.0, -1.0])
    # average over four points on the wire surface so the collocation keeps the
    # mirror symmetries of the layout
    P = np.zeros((len(mid), len(mid)))
    for n in (n1, -n1, n2, -n2):
        colloc = mid + radii[:, None] * n
        P += segment_potential(colloc, starts, ends)
        if geom.ground_plane:
            P -= segment_potential(colloc, starts * flip, ends * flip)
    P /= 4.0
    V = np.array([geom.electrodes[k].voltage for k in owner], float)
    if not np.all(np.isfinite(P)):
        raise SingularGeometryError("collocation matrix has non-finite entries (touching electrodes?)")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", linalg.LinAlgWarning)
            lam = linalg.solve(P, V)
    except (linalg.LinAlgError, linalg.LinAlgWarning) as exc:
        raise SingularGeometryError(f"collocation matrix is singular ({exc}); coincident electrodes?") from None
    return ChargeSolution(starts, ends, lam, owner, geom.ground_plane, np.asarray(geom.bias_field, float))


def inside_electrode(geom: TrapGeometry, points) -> np.ndarray:
    """Boolean mask of points closer to a wire axis than its radius."""
    points = np.atleast_2d(np.asarray(points, float))
    mask = np.zeros(len(points), bool)
    for s in geom.electrodes:
        a, b = np.asarray(s.start, float), np.asarray(s.end, float)
        d = b - a
        t = np.clip((points - a) @ d / (d @ d), 0.0, 1.0)
        mask |= np.linalg.norm(points - (a + t[:, None] * d), axis=1) < s.radius
    return mask


def _check_outside(geom: TrapGeometry, points: np.ndarray) -> None:
    if np.any(inside_electrode(geom, points)):
        raise InsideElectrodeError("evaluation point lies inside an electrode")


def potential_at(geom: TrapGeometry, sol: ChargeSolution, r, check: bool = True) -> np.ndarray | float:
    """Electrostatic potential (V) at point(s) r, including the bias term -E_bias.r."""
    pts = np.atleast_2d(np.asarray(r, float))
    if check:
        _check_outside(geom, pts)
    s, e, lam = _all_pieces(sol)
    phi = segment_potential(pts, s, e) @ lam - pts @ sol.bias_field
    return phi if np.ndim(r) > 1 else float(phi[0])


def field_at(geom: TrapGeometry, sol: ChargeSolution, r, check: bool = True) -> np.ndarray:
    """Electric field (V/m) at point(s) r; shape (3,) or (P, 3)."""
    pts = np.atleast_2d(np.asarray(r, float))
    if check:
        _check_outside(geom, pts)
    s, e, lam = _all_pieces(sol)
    E = _field_sum(pts, s, e, lam) + sol.bias_field[None, :]
    return E if np.ndim(r) > 1 else E[0]
