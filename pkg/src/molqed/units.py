"""Physical constants, unit conversion and the molecule registry.

Internally everything is SI with frequencies stored as angular frequencies
(rad/s). Conversions to lab units (GHz, V/cm, mK, Debye) happen only at the
config/report boundary.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

from scipy import constants as _sc

__all__ = [
    "PhysicalConstants",
    "CONSTANTS",
    "MoleculeSpec",
    "UnitError",
    "UnknownMoleculeError",
    "convert",
    "lookup_molecule",
    "register_molecule",
    "registered_molecules",
    "TWO_PI",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = _sc.hbar
    k_B: float = _sc.k
    epsilon_0: float = _sc.epsilon_0
    elementary_charge: float = _sc.e
    # 1 D = 1e-21 / c  C m
    debye: float = 1e-21 / _sc.c
    amu: float = _sc.physical_constants["atomic mass constant"][0]

    @property
    def h(self) -> float:
        return TWO_PI * self.hbar


CONSTANTS = PhysicalConstants()


class UnitError(ValueError):
    """Raised for unknown unit tags or incompatible dimensions."""


# unit tag -> (dimension, factor to SI base of that dimension)
# "energy" covers energy, ordinary frequency, angular frequency and temperature;
# its SI base is the joule.
_C = CONSTANTS
_UNITS: dict[str, tuple[str, float]] = {
    "J": ("energy", 1.0),
    "rad/s": ("energy", _C.hbar),
    "Hz": ("energy", _C.h),
    "kHz": ("energy", _C.h * 1e3),
    "MHz": ("energy", _C.h * 1e6),
    "GHz": ("energy", _C.h * 1e9),
    "K": ("energy", _C.k_B),
    "mK": ("energy", _C.k_B * 1e-3),
    "uK": ("energy", _C.k_B * 1e-6),
    "nK": ("energy", _C.k_B * 1e-9),
    "V/m": ("field", 1.0),
    "V/cm": ("field", 1e2),
    "kV/cm": ("field", 1e5),
    "C*m": ("dipole", 1.0),
    "D": ("dipole", _C.debye),
    "m": ("length", 1.0),
    "cm": ("length", 1e-2),
    "um": ("length", 1e-6),
    "nm": ("length", 1e-9),
    "kg": ("mass", 1.0),
    "amu": ("mass", _C.amu),
    "V": ("voltage", 1.0),
    "uV": ("voltage", 1e-6),
    "s": ("time", 1.0),
    "ms": ("time", 1e-3),
    "us": ("time", 1e-6),
}


def convert(value: float, from_unit: str, to_unit: str) -> float:
    """Convert ``value`` between unit tags.

    Frequency, angular frequency, energy and temperature are mutually
    convertible through h, hbar and k_B.

    >>> round(convert(2 * math.pi * 2.83e9, "rad/s", "GHz"), 12)
    2.83
    """
    try:
        dim_a, fa = _UNITS[from_unit]
        dim_b, fb = _UNITS[to_unit]
    except KeyError as exc:
        raise UnitError(f"unknown unit tag {exc.args[0]!r}; known: {sorted(_UNITS)}") from None
    if dim_a != dim_b:
        raise UnitError(f"cannot convert {from_unit} ({dim_a}) to {to_unit} ({dim_b})")
    if from_unit == to_unit:
        return float(value)
    return float(value) * (fa / fb)


def _is_half_integer(x: float) -> bool:
    return x >= 0 and abs(2 * x - round(2 * x)) < 1e-12


@dataclass(frozen=True)
class MoleculeSpec:
    """Constants of one diatomic species, SI with angular frequencies.

    ``mu`` is the body-fixed dipole (C m); ``B``, ``gamma_sr``, ``b_hf``,
    ``c_hf`` and ``eqQ`` are in rad/s.
    """

    name: str
    mass: float
    mu: float
    B: float
    gamma_sr: float = 0.0
    b_hf: float = 0.0
    c_hf: float = 0.0
    eqQ: float = 0.0
    I_nuc: float = 0.0
    S_elec: float = 0.0

    def __post_init__(self):
        for key in ("mass", "mu", "B"):
            v = getattr(self, key)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"MoleculeSpec.{key} must be positive, got {v!r}")
        for key in ("I_nuc", "S_elec"):
            if not _is_half_integer(getattr(self, key)):
                raise ValueError(f"MoleculeSpec.{key} must be a non-negative half-integer")

    @property
    def field_scale(self) -> float:
        """hbar*B/mu in V/m, the natural field unit of the rotor."""
        return CONSTANTS.hbar * self.B / self.mu

    def replace(self, **changes) -> "MoleculeSpec":
        data = asdict(self)
        data.update(changes)
        return MoleculeSpec(**data)

    @classmethod
    def from_lab_units(
        cls,
        name: str,
        mass_amu: float,
        B_GHz: float,
        mu_D: float | None = None,
        mu_MHz_per_Vcm: float | None = None,
        gamma_sr_MHz: float = 0.0,
        b_MHz: float = 0.0,
        c_MHz: float = 0.0,
        eqQ_MHz: float = 0.0,
        I_nuc: float = 0.0,
        S_elec: float = 0.0,
    ) -> "MoleculeSpec":
        """Build a spec from the units molecular-physics tables use."""
        if (mu_D is None) == (mu_MHz_per_Vcm is None):
            raise ValueError("give exactly one of mu_D or mu_MHz_per_Vcm")
        if mu_D is not None:
            mu = mu_D * CONSTANTS.debye
        else:
            # mu/h in MHz per (V/cm)  ->  C m
            mu = mu_MHz_per_Vcm * 1e6 * CONSTANTS.h / 1e2
        w = lambda f: TWO_PI * f * 1e6  # noqa: E731
        return cls(
            name=name,
            mass=mass_amu * CONSTANTS.amu,
            mu=mu,
            B=TWO_PI * B_GHz * 1e9,
            gamma_sr=w(gamma_sr_MHz),
            b_hf=w(b_MHz),
            c_hf=w(c_MHz),
            eqQ=w(eqQ_MHz),
            I_nuc=I_nuc,
            S_elec=S_elec,
        )


# CaBr (40Ca 79Br, X 2Sigma+). The dipole is stored from the Stark coefficient
# mu/h = 2.25 MHz/(V/cm); the same source quotes 4.36 D, which is 2.5% lower.
CABR = MoleculeSpec.from_lab_units(
    "CaBr",
    mass_amu=119.0,
    B_GHz=2.83,
    mu_MHz_per_Vcm=2.25,
    gamma_sr_MHz=90.7,
    b_MHz=95.3,
    c_MHz=77.6,
    eqQ_MHz=20.0,
    I_nuc=1.5,
    S_elec=0.5,
)

_REGISTRY: dict[str, MoleculeSpec] = {"CaBr": CABR}


class UnknownMoleculeError(KeyError):
    def __str__(self):
        return self.args[0]


def lookup_molecule(name: str) -> MoleculeSpec:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise UnknownMoleculeError(
            f"unknown molecule {name!r}; registered: {', '.join(sorted(_REGISTRY))}"
        ) from None


def register_molecule(spec: MoleculeSpec, overwrite: bool = False) -> None:
    if spec.name in _REGISTRY and not overwrite and _REGISTRY[spec.name] != spec:
        raise ValueError(f"molecule {spec.name!r} already registered")
    _REGISTRY[spec.name] = spec


def registered_molecules() -> list[str]:
    return sorted(_REGISTRY)


def molecule_field_names() -> list[str]:
    return [f.name for f in fields(MoleculeSpec)]
