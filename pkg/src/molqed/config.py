"""Scenario configuration: a strict YAML schema with lab-unit keys.

Every key carries its unit in the name (``w_um``, ``Q``, ``T_r_mK``). Unknown
keys are rejected and validation errors point at the offending line of the
file. An empty file gives the CaBr reference scenario.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Annotated, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .budget import NoiseSpec
from .cavity import ResonatorSpec
from .electrostatics import Segment, TrapGeometry
from .trap import ez_trap_geometry
from .units import MoleculeSpec, lookup_molecule

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "MoleculeConfig",
    "TrapConfig",
    "ResonatorConfig",
    "NoiseConfig",
    "OperatingPoint",
    "StarkConfig",
    "HyperfineConfig",
    "CoolingConfig",
    "parse_config",
    "load_config_text",
    "dump_config",
    "set_key",
    "OUTPUTS",
]

OUTPUTS = ("stark", "hyperfine", "trap", "coupling", "cooling", "budget")

Pos = Annotated[float, Field(gt=0)]
NonNeg = Annotated[float, Field(ge=0)]
Vec3 = tuple[float, float, float]


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class MoleculeConfig(_Strict):
    name: str
    mass_amu: Pos
    B_GHz: Pos
    mu_D: Pos | None = None
    mu_MHz_per_Vcm: Pos | None = None
    gamma_sr_MHz: float = 0.0
    b_MHz: float = 0.0
    c_MHz: float = 0.0
    eqQ_MHz: float = 0.0
    I_nuc: NonNeg = 0.0
    S_elec: NonNeg = 0.0

    @model_validator(mode="after")
    def _one_dipole(self):
        if (self.mu_D is None) == (self.mu_MHz_per_Vcm is None):
            raise ValueError("give exactly one of mu_D or mu_MHz_per_Vcm")
        return self

    def build(self) -> MoleculeSpec:
        return MoleculeSpec.from_lab_units(**self.model_dump())


class ElectrodeConfig(_Strict):
    start_um: Vec3
    end_um: Vec3
    voltage_V: float
    radius_um: Pos


class TrapConfig(_Strict):
    preset: Literal["ez", "custom"] = "ez"
    w_um: Pos = 0.1
    # EZ preset: wire voltages +-voltage_V; offset field at the trap centre
    # (null puts the trap bottom at the rotor sweet spot)
    voltage_V: Pos = 0.1
    offset_V_per_cm: Pos | None = None
    height_um: Pos | None = None
    length_w: Pos = 4.0
    leg_w: Pos = 0.35
    radius_w: Pos = 0.02
    # custom geometry
    electrodes: list[ElectrodeConfig] | None = None
    bias_V_per_cm: Vec3 = (0.0, 0.0, 0.0)
    ground_plane: bool = False
    n_sub: Annotated[int, Field(ge=1)] = 12
    grid_points: Annotated[int, Field(ge=5)] = 17
    vdw: bool = True

    @model_validator(mode="after")
    def _custom_has_electrodes(self):
        if self.preset == "custom" and not self.electrodes:
            raise ValueError("preset 'custom' needs a non-empty electrodes list")
        return self

    def build(self, offset_field: float) -> TrapGeometry:
        """Geometry in SI; ``offset_field`` (V/m) is used by the EZ preset."""
        w = self.w_um * 1e-6
        if self.preset == "ez":
            height = None if self.height_um is None else self.height_um * 1e-6
            return ez_trap_geometry(w, self.voltage_V, offset_field, height, self.length_w, self.leg_w,
                                    self.radius_w, self.n_sub)
        segs = tuple(
            Segment(tuple(v * 1e-6 for v in e.start_um), tuple(v * 1e-6 for v in e.end_um), e.voltage_V,
                    e.radius_um * 1e-6)
            for e in self.electrodes
        )
        bias = tuple(v * 100.0 for v in self.bias_V_per_cm)
        return TrapGeometry(segs, bias, self.ground_plane, w, self.n_sub)


class ResonatorConfig(_Strict):
    # null: resonant with the zero-field qubit splitting 4B
    frequency_GHz: Pos | None = None
    Q: Pos = 1e6
    # null: same as the trap scale w
    w_um: Pos | None = None
    Z0_ohm: Pos = 50.0


class NoiseConfig(_Strict):
    S_Q_coeff: NonNeg = 1e-6
    C_t_fF: Pos = 1.0
    V_EZ_V: Pos = 0.1
    V_rms_eff_uV: NonNeg = 0.2
    T_N_K: NonNeg = 5.0

    def build(self) -> NoiseSpec:
        return NoiseSpec(self.S_Q_coeff, self.C_t_fF * 1e-15, self.V_EZ_V, self.V_rms_eff_uV * 1e-6, self.T_N_K)


class OperatingPoint(_Strict):
    # null: rotor sweet spot
    bias_V_per_cm: Pos | None = None
    # null: height of the trap minimum found for the geometry
    z0_um: Pos | None = None
    # null: stiffest trap frequency of the computed geometry
    omega_t_MHz: Pos | None = 5.0
    Omega_MHz: Pos = 1.0
    Delta_MHz: Pos | None = None
    Delta_r_MHz: Pos = 5.0
    T_r_mK: NonNeg = 100.0
    # null: motional occupation after cooling, equal to the resonator's thermal photon number
    n_bar: NonNeg | None = None
    # null: k_B T_N / (hbar omega)
    n_amp: Pos | None = None


class StarkConfig(_Strict):
    field_max_V_per_cm: Pos = 10000.0
    points: Annotated[int, Field(ge=2)] = 201
    N_max: Annotated[int, Field(ge=3)] = 12


class HyperfineConfig(_Strict):
    # null: rotor sweet spot
    field_V_per_cm: Pos | None = None
    N_max: Annotated[int, Field(ge=3)] = 8


class CoolingConfig(_Strict):
    N_fock: Annotated[int, Field(ge=1)] = 3
    N_motion: Annotated[int, Field(ge=1)] = 6
    # Rabi frequency of the red-sideband drive (ordinary frequency)
    Omega_drive_MHz: Pos = 1.0
    n_motion_initial: NonNeg = 1.0
    # simulated time in units of the analytic cooling time
    duration: Pos = 4.0
    n_out: Annotated[int, Field(ge=3)] = 201
    method: Literal["expm", "adaptive"] = "expm"
    decay_convention: Literal["amplitude", "energy"] = "amplitude"


class ScenarioConfig(_Strict):
    molecule: str | MoleculeConfig = "CaBr"
    trap: TrapConfig = TrapConfig()
    resonator: ResonatorConfig = ResonatorConfig()
    noise: NoiseConfig = NoiseConfig()
    operating_point: OperatingPoint = OperatingPoint()
    stark: StarkConfig = StarkConfig()
    hyperfine: HyperfineConfig = HyperfineConfig()
    cooling: CoolingConfig = CoolingConfig()
    outputs: list[Literal["stark", "hyperfine", "trap", "coupling", "cooling", "budget"]] = list(OUTPUTS)

    def molecule_spec(self) -> MoleculeSpec:
        if isinstance(self.molecule, str):
            return lookup_molecule(self.molecule)
        return self.molecule.build()

    def resonator_spec(self, mol: MoleculeSpec) -> ResonatorSpec:
        r = self.resonator
        omega = 4 * mol.B if r.frequency_GHz is None else 2 * math.pi * r.frequency_GHz * 1e9
        w = (self.trap.w_um if r.w_um is None else r.w_um) * 1e-6
        return ResonatorSpec(omega, r.Q, w, r.Z0_ohm)


def _node_line(root, loc) -> int | None:
    """1-based line of the YAML node at path ``loc`` (deepest existing node)."""
    node, line = root, None
    for key in loc:
        if node is None:
            break
        line = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            nxt = None
            for k, v in node.value:
                if k.value == str(key):
                    line, nxt = k.start_mark.line + 1, v
                    break
            node = nxt
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
            line = node.start_mark.line + 1
        else:
            break
    return line


def _format_errors(exc: ValidationError, root, source: str) -> str:
    msgs = []
    errors = exc.errors()
    for err in errors:
        raw = err["loc"]
        # a mapping given for a str-or-mapping field also fails the str branch; hide that noise
        if len(raw) == 2 and raw[1] == "str" and any(e["loc"][:1] == raw[:1] and e is not err for e in errors):
            continue
        # drop pydantic's union-branch tags such as 'function-after[...]'
        loc = [p for p in raw if not (isinstance(p, str) and ("[" in p or p == "str"))]
        key = ".".join(str(p) for p in loc) or "<root>"
        line = _node_line(root, loc) if root is not None else None
        where = f"{source}:{line}" if line else source
        msgs.append(f"{where}: {key}: {err['msg']}")
    return "invalid configuration\n  " + "\n  ".join(dict.fromkeys(msgs))


def load_config_text(text: str, source: str = "<config>") -> ScenarioConfig:
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: YAML syntax error: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping of sections")
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc, root, source)) from None


def parse_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    return load_config_text(text, str(path))


def dump_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=False)


def set_key(cfg: ScenarioConfig, dotted: str, value) -> ScenarioConfig:
    """Copy of ``cfg`` with the dotted key (e.g. ``trap.voltage_V``) replaced and revalidated."""
    data = cfg.model_dump(mode="json")
    parts = dotted.split(".")
    node = data
    for p in parts[:-1]:
        if not isinstance(node, dict) or p not in node or not isinstance(node[p], dict):
            raise ConfigError(f"unknown config key {dotted!r}")
        node = node[p]
    if parts[-1] not in node:
        raise ConfigError(f"unknown config key {dotted!r}")
    node[parts[-1]] = value
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc, None, f"--sweep {dotted}")) from None
