"""Stripline resonator vacuum field and molecule-resonator coupling."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .rotor import DEFAULT_N_MAX, transition_dipole
from .units import CONSTANTS, MoleculeSpec

__all__ = [
    "ResonatorSpec",
    "CouplingResult",
    "LambDickeWarning",
    "capacitance",
    "zero_point_voltage",
    "field_factor",
    "zero_point_field",
    "vacuum_rabi",
    "lamb_dicke",
]

ETA_WARN = 0.3


class LambDickeWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ResonatorSpec:
    omega: float
    Q: float
    w: float
    Z0: float = 50.0

    def __post_init__(self):
        for key in ("omega", "Q", "w", "Z0"):
            if not getattr(self, key) > 0:
                raise ValueError(f"ResonatorSpec.{key} must be positive")

    @property
    def kappa(self) -> float:
        return self.omega / self.Q


@dataclass(frozen=True)
class CouplingResult:
    V0: float
    E0: float
    g: float
    eta: float
    wp: float


def capacitance(res: ResonatorSpec) -> float:
    """Effective capacitance pi/(2 omega Z0) of a half-wave line (F)."""
    return math.pi / (2 * res.omega * res.Z0)


def zero_point_voltage(res: ResonatorSpec) -> float:
    """sqrt(hbar omega / 2C) = sqrt(hbar omega^2 Z0 / pi), in V."""
    return math.sqrt(CONSTANTS.hbar * res.omega**2 * res.Z0 / math.pi)


def field_factor(z: float, w: float) -> float:
    """Geometric factor of the vacuum field: 1 close to the gap, 0.5 w/z beyond w/2."""
    if z <= 0:
        raise ValueError("z must be positive")
    return min(1.0, 0.5 * w / z)


def zero_point_field(res: ResonatorSpec, z: float) -> float:
    return field_factor(z, res.w) * zero_point_voltage(res) / res.w


def lamb_dicke(mol: MoleculeSpec, omega_t: float, z0: float) -> tuple[float, float]:
    """(a0, eta) with a0 = sqrt(hbar / 2 m omega_t) and eta = a0 / z0."""
    if omega_t <= 0 or z0 <= 0:
        raise ValueError("omega_t and z0 must be positive")
    a0 = math.sqrt(CONSTANTS.hbar / (2 * mol.mass * omega_t))
    return a0, a0 / z0


def vacuum_rabi(res: ResonatorSpec, mol: MoleculeSpec, z: float, E_dc_bias: float | None = None,
                omega_t: float | None = None, N_max: int = DEFAULT_N_MAX) -> CouplingResult:
    """Coupling of the |1> <-> |2> dipole to the resonator vacuum field at height z.

    The transition dipole comes from the Stark eigenvectors at ``E_dc_bias``;
    without a bias it falls back to 0.5 mu. ``omega_t`` (trap frequency) sets
    the Lamb-Dicke parameter with the field gradient length z; eta is nan if
    it is not given.
    """
    V0 = zero_point_voltage(res)
    E0 = zero_point_field(res, z)
    wp = 0.5 * mol.mu if E_dc_bias is None else transition_dipole(mol, E_dc_bias, N_max)
    g = wp * E0 / CONSTANTS.hbar
    eta = float("nan")
    if omega_t is not None:
        _, eta = lamb_dicke(mol, omega_t, z)
        if eta > ETA_WARN:
            warnings.warn(f"Lamb-Dicke parameter {eta:.3f} exceeds {ETA_WARN}", LambDickeWarning, stacklevel=2)
    return CouplingResult(V0, E0, g, eta, wp)
