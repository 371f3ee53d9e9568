"""Scenario orchestration and the design report.

:func:`run_scenario` runs one pipeline (or all of them) for a
:class:`ScenarioConfig`, writes plot-ready CSVs into an output directory and
returns a :class:`DesignReport`. Each report entry carries a unit and a
provenance tag: ``formula`` (closed-form expression), ``order-of-magnitude``
(estimate with prefactor 1), ``simulation`` (numerical solution) or
``input`` (taken from the configuration).
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from . import __version__
from .budget import BUDGET_UNITS, assemble_budget
from .cavity import capacitance, lamb_dicke, vacuum_rabi
from .config import ScenarioConfig, dump_config
from .cooling import (
    build_cooling_model,
    cooling_rate_analytic,
    energy_removal_rate,
    evolve,
    final_temperature,
    fit_decay_rate,
    initial_state,
    thermal_occupation,
)
from .hyperfine import hyperfine_qubit_detuning, hyperfine_spectrum
from .rotor import (
    QUBIT_LOWER,
    QUBIT_UPPER,
    RotorState,
    effective_dipole,
    find_sweet_spot,
    linear_regime_field,
    max_trap_depth,
    qubit_splitting,
    splitting_sensitivity,
    stark_map,
    sweet_spot_depth,
)
from .trap import NoMinimumError, TrapDestroyedError, characterize_trap, export_field_map, loading_phase_space_target
from .units import CONSTANTS, TWO_PI

__all__ = ["Entry", "DesignReport", "Scenario", "PhysicsEscalation", "ScenarioError", "run_scenario", "SUBCOMMANDS"]

SUBCOMMANDS = {
    "stark-map": ("stark",),
    "hyperfine": ("hyperfine",),
    "trap": ("trap",),
    "coupling": ("coupling",),
    "cool": ("cooling",),
    "budget": ("budget",),
    "report": None,
}


class ScenarioError(RuntimeError):
    """A pipeline failed; the message names the pipeline and the original error."""


class PhysicsEscalation(RuntimeError):
    """A physics outcome that makes the scenario unusable (exit code 2)."""


@dataclass(frozen=True)
class Entry:
    key: str
    value: float
    unit: str
    provenance: str
    note: str = ""


@dataclass
class DesignReport:
    sections: dict[str, list[Entry]] = field(default_factory=dict)
    checks: list[tuple[str, bool]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def add(self, section: str, key: str, value, unit: str, provenance: str, note: str = "") -> None:
        self.sections.setdefault(section, []).append(Entry(key, float(value), unit, provenance, note))

    def add_vector(self, section: str, key: str, values, unit: str, provenance: str) -> None:
        for axis, v in zip("xyz", values):
            self.add(section, f"{key}_{axis}", v, unit, provenance)

    def check(self, label: str, ok: bool) -> None:
        self.checks.append((label, bool(ok)))

    def get(self, section: str, key: str) -> float:
        for e in self.sections.get(section, []):
            if e.key == key:
                return e.value
        raise KeyError(f"{section}.{key}")

    def scalars(self) -> dict[str, float]:
        return {f"{s}.{e.key}": e.value for s, entries in self.sections.items() for e in entries}

    def to_text(self) -> str:
        lines = [f"# molqed design report (version {__version__})"]
        for name, entries in self.sections.items():
            lines.append(f"[{name}]")
            width = max(len(e.key) for e in entries)
            for e in entries:
                note = f"  {e.note}" if e.note else ""
                lines.append(f"{e.key:<{width}} = {e.value:.9e} {e.unit} ({e.provenance}){note}")
        if self.checks:
            lines.append("[checks]")
            lines += [f"{'pass' if ok else 'FAIL'}: {label}" for label, ok in self.checks]
        if self.warnings:
            lines.append("[warnings]")
            lines += [f"warning: {w}" for w in self.warnings]
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["section", "key", "value", "unit", "provenance", "note"])
            # units vary by row and live in the unit column
            w.writerow(["", "", "per-row", "", "", ""])
            for name, entries in self.sections.items():
                for e in entries:
                    w.writerow([name, e.key, f"{e.value:.17e}", e.unit, e.provenance, e.note])


def _hz(omega: float) -> float:
    return omega / TWO_PI


class Scenario:
    """Shared, lazily computed quantities of one configured operating point."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.mol = cfg.molecule_spec()
        self.res = cfg.resonator_spec(self.mol)
        self.noise = cfg.noise.build()
        self.op = cfg.operating_point

    @cached_property
    def sweet_spot(self) -> float:
        return find_sweet_spot(self.mol, self.cfg.stark.N_max)

    @cached_property
    def bias(self) -> float:
        return self.sweet_spot if self.op.bias_V_per_cm is None else self.op.bias_V_per_cm * 100.0

    @cached_property
    def trap(self):
        t = self.cfg.trap
        offset = self.sweet_spot if t.offset_V_per_cm is None else t.offset_V_per_cm * 100.0
        geom = t.build(offset)
        return geom, characterize_trap(geom, self.mol, self.cfg.stark.N_max, t.grid_points, t.vdw)

    @cached_property
    def omega_t(self) -> float:
        if self.op.omega_t_MHz is not None:
            return TWO_PI * self.op.omega_t_MHz * 1e6
        return float(np.max(self.trap[1].omega_t))

    @cached_property
    def z0(self) -> float:
        if self.op.z0_um is not None:
            return self.op.z0_um * 1e-6
        return float(self.trap[1].r0[2])

    @cached_property
    def coupling(self):
        return vacuum_rabi(self.res, self.mol, self.z0, self.bias, self.omega_t, self.cfg.stark.N_max)

    @cached_property
    def n_bar(self) -> float:
        if self.op.n_bar is not None:
            return self.op.n_bar
        return thermal_occupation(self.res.omega, self.op.T_r_mK * 1e-3)


def _stark(sc: Scenario, rep: DesignReport, out: Path) -> None:
    mol, cfg = sc.mol, sc.cfg.stark
    N = cfg.N_max
    grid = np.linspace(0.0, cfg.field_max_V_per_cm * 100.0, cfg.points)
    sm = stark_map(mol, grid, N)
    sm.to_csv(out / "stark_map.csv", [RotorState(0, 0), QUBIT_LOWER, QUBIT_UPPER])
    es = sc.sweet_spot
    with open(out / "sweet_spot.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["field_Vcm", "omega0_GHz"])
        w.writerow(["V/cm", "GHz"])
        w.writerow([f"{es / 100:.17e}", f"{_hz(qubit_splitting(mol, es, N)) / 1e9:.17e}"])
    e_lin = linear_regime_field(mol, N)
    u_max, e_max = max_trap_depth(mol, N)
    s = "stark"
    rep.add(s, "omega0_zero_field", _hz(qubit_splitting(mol, 0.0, N)) / 1e9, "GHz", "simulation")
    rep.add(s, "sweet_spot_field", es / 100, "V/cm", "simulation")
    rep.add(s, "omega0_sweet_spot", _hz(qubit_splitting(mol, es, N)) / 1e9, "GHz", "simulation")
    rep.add(s, "d2omega0_dE2_sweet_spot", _hz(splitting_sensitivity(mol, es, N, 2)) * 1e4, "Hz/(V/cm)^2",
            "simulation")
    rep.add(s, "linear_regime_field", e_lin / 100, "V/cm", "simulation")
    rep.add(s, "domega0_dE_linear", _hz(splitting_sensitivity(mol, e_lin, N, 1)) * 100, "Hz/(V/cm)",
            "simulation")
    rep.add(s, "dipole_1_sweet_spot", effective_dipole(mol, QUBIT_LOWER, es, N) / mol.mu, "mu", "simulation")
    rep.add(s, "dipole_2_sweet_spot", effective_dipole(mol, QUBIT_UPPER, es, N) / mol.mu, "mu", "simulation")
    rep.add(s, "max_trap_depth", u_max / CONSTANTS.k_B * 1e3, "mK", "simulation")
    rep.add(s, "max_trap_depth_field", e_max / 100, "V/cm", "simulation")
    rep.add(s, "sweet_spot_trap_depth", sweet_spot_depth(mol, N) / CONSTANTS.k_B * 1e3, "mK", "simulation")


def _hyperfine(sc: Scenario, rep: DesignReport, out: Path) -> None:
    cfg = sc.cfg.hyperfine
    E = sc.sweet_spot if cfg.field_V_per_cm is None else cfg.field_V_per_cm * 100.0
    spec = hyperfine_spectrum(sc.mol, E, cfg.N_max)
    spec.to_csv(out / "hyperfine.csv")
    s = "hyperfine"
    rep.add(s, "field", E / 100, "V/cm", "input" if cfg.field_V_per_cm is not None else "simulation")
    rep.add(s, "basis_size", spec.basis_size, "1", "simulation")
    rep.add(s, "qubit_detuning_MF3_0", _hz(hyperfine_qubit_detuning(sc.mol, E, cfg.N_max)) / 1e6, "MHz",
            "simulation")


def _trap(sc: Scenario, rep: DesignReport, out: Path) -> None:
    geom, tc = sc.trap
    s = "trap"
    kb = CONSTANTS.k_B
    rep.add_vector(s, "r0", tc.r0 * 1e6, "um", "simulation")
    rep.add(s, "E_off", tc.E_off / 100, "V/cm", "simulation")
    rep.add(s, "depth", tc.depth / kb * 1e3, "mK", "simulation")
    rep.add(s, "depth_vdw", tc.depth_vdw / kb * 1e3, "mK", "simulation")
    for k, wt in enumerate(tc.omega_t):
        rep.add(s, f"omega_t_{k}", _hz(wt) / 1e6, "MHz", "simulation")
    rep.add(s, "vdw_frequency_shift", tc.vdw_shift, "1", "formula")
    rep.add(s, "depth_scaling_ratio", tc.depth_scaling_ratio, "1", "simulation")
    rep.add(s, "loading_phase_space_target", loading_phase_space_target(geom.w, tc.depth), "cm^-3 K^-3/2",
            "order-of-magnitude")
    w = geom.w
    xs = tc.r0[0] + np.linspace(-2.0, 2.0, 21) * w
    zs = np.linspace(0.1, 3.0, 30) * w
    export_field_map(out / "field_map.csv", geom, sc.mol, xs, [tc.r0[1]], zs, sc.cfg.stark.N_max)
    rep.check("trap survives the surface image attraction", tc.depth_vdw > 0)
    if tc.depth_vdw <= 0:
        raise PhysicsEscalation("van der Waals attraction to the surface destroys the trap")


def _coupling(sc: Scenario, rep: DesignReport, out: Path) -> None:
    c, res = sc.coupling, sc.res
    s = "coupling"
    rep.add(s, "resonator_frequency", _hz(res.omega) / 1e9, "GHz", "input")
    rep.add(s, "kappa", _hz(res.kappa) / 1e3, "kHz", "formula")
    rep.add(s, "capacitance", capacitance(res) * 1e12, "pF", "formula")
    rep.add(s, "V0", c.V0 * 1e6, "uV", "formula")
    rep.add(s, "z0", sc.z0 * 1e6, "um", "input" if sc.op.z0_um is not None else "simulation")
    rep.add(s, "E0", c.E0 / 100, "V/cm", "formula")
    rep.add(s, "transition_dipole", c.wp / sc.mol.mu, "mu", "simulation")
    rep.add(s, "g", _hz(c.g) / 1e3, "kHz", "formula")
    rep.add(s, "omega_t", _hz(sc.omega_t) / 1e6, "MHz", "input" if sc.op.omega_t_MHz is not None else "simulation")
    a0, _ = lamb_dicke(sc.mol, sc.omega_t, sc.z0)
    rep.add(s, "a0", a0 * 1e9, "nm", "formula")
    rep.add(s, "eta", c.eta, "1", "formula")
    rep.add(s, "strong_coupling", float(c.g > res.kappa), "bool", "formula")


def _cooling(sc: Scenario, rep: DesignReport, out: Path) -> None:
    cfg, c, res = sc.cfg.cooling, sc.coupling, sc.res
    Omega = TWO_PI * cfg.Omega_drive_MHz * 1e6
    T_r = sc.op.T_r_mK * 1e-3
    n_th = thermal_occupation(res.omega, T_r)
    rates = cooling_rate_analytic(c.g, res.kappa, c.eta, Omega)
    gamma_est = min(rates.weak_drive, rates.saturated)
    s = "cooling"
    rep.add(s, "gamma_sp", _hz(rates.gamma_sp) / 1e3, "kHz", "formula")
    rep.add(s, "repump_rate", _hz(rates.R), "Hz", "formula")
    rep.add(s, "rate_weak_drive", _hz(rates.weak_drive), "Hz", "formula")
    rep.add(s, "rate_saturated", _hz(rates.saturated), "Hz", "formula")
    rep.add(s, "energy_removal_rate", energy_removal_rate(sc.omega_t, gamma_est), "K/s", "formula")
    T_t, ratio = final_temperature(sc.omega_t, res.omega, T_r)
    rep.add(s, "n_thermal_resonator", n_th, "1", "formula")
    rep.add(s, "final_trap_temperature", T_t * 1e6, "uK", "formula")
    rep.add(s, "frequency_ratio", ratio, "1", "formula")
    model = build_cooling_model(c, res, sc.omega_t, Omega, n_th, N_fock=cfg.N_fock, N_motion=cfg.N_motion,
                                decay_convention=cfg.decay_convention)
    rho0 = initial_state(model, cfg.n_motion_initial, motion="thermal" if cfg.n_motion_initial % 1 else "fock")
    traj = evolve(model, rho0, cfg.duration / gamma_est, n_out=cfg.n_out, method=cfg.method)
    traj.to_csv(out / "cooling.csv")
    G, _, C = fit_decay_rate(traj.times, traj.mean_n_motion)
    rep.add(s, "rate_simulated", _hz(G), "Hz", "simulation")
    rep.add(s, "n_motion_asymptote", C, "1", "simulation")
    rep.add(s, "n_motion_final", traj.mean_n_motion[-1], "1", "simulation")
    rep.add(s, "max_trace_error", float(np.max(traj.trace_error)), "1", "simulation")
    rep.add(s, "min_eigenvalue", float(np.min(traj.min_eigenvalue)), "1", "simulation")


def _budget(sc: Scenario, rep: DesignReport, out: Path) -> None:
    op = sc.op
    a0, _ = lamb_dicke(sc.mol, sc.omega_t, sc.z0)
    b = assemble_budget(
        sc.mol, sc.bias, sc.cfg.trap.w_um * 1e-6, sc.omega_t, a0, sc.n_bar, sc.coupling.g, sc.res.kappa,
        TWO_PI * op.Omega_MHz * 1e6, TWO_PI * op.Delta_r_MHz * 1e6, sc.res.omega, sc.noise,
        Delta=None if op.Delta_MHz is None else TWO_PI * op.Delta_MHz * 1e6, n_amp=op.n_amp,
        N_max=sc.cfg.stark.N_max,
    )
    (out / "budget.csv").write_text(b.to_csv())
    for key, value in b.values().items():
        rep.add("budget", key, value, BUDGET_UNITS[key], b.provenance(key))
    rep.add("budget", "n_bar", sc.n_bar, "1", "input" if op.n_bar is not None else "formula")
    rep.warnings.extend(b.warnings)
    rep.check("two-qubit gate error p_err < 1%", b.p_err < 1e-2)
    rep.check("sweet-spot voltage dephasing gamma_V2 < 2pi x 1 Hz", b.gamma_V2 < TWO_PI)
    rep.check("heating rate Gamma_01 < 2pi x 1 Hz", b.Gamma_01 < TWO_PI)


_PIPELINES = {
    "stark": _stark,
    "hyperfine": _hyperfine,
    "trap": _trap,
    "coupling": _coupling,
    "cooling": _cooling,
    "budget": _budget,
}


def run_scenario(cfg: ScenarioConfig, subcommand: str, out_dir, fmt: str = "report") -> DesignReport:
    """Run ``subcommand`` and write its files plus the report into ``out_dir``.

    Raises :class:`PhysicsEscalation` for unusable physics (the report is still
    written) and lets configuration or numerical errors propagate.
    """
    if subcommand not in SUBCOMMANDS:
        raise ValueError(f"unknown subcommand {subcommand!r}; choose from {', '.join(SUBCOMMANDS)}")
    if fmt not in ("report", "csv"):
        raise ValueError("format must be 'report' or 'csv'")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(dump_config(cfg))
    names = SUBCOMMANDS[subcommand] or tuple(k for k in _PIPELINES if k in cfg.outputs)
    sc = Scenario(cfg)
    rep = DesignReport()
    escalation = None
    for name in names:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                _PIPELINES[name](sc, rep, out)
            except PhysicsEscalation as exc:
                escalation = exc
            except (NoMinimumError, TrapDestroyedError) as exc:
                escalation = PhysicsEscalation(f"{name}: {exc}")
            except Exception as exc:
                raise ScenarioError(f"{name}: {type(exc).__name__}: {exc}") from exc
        rep.warnings.extend(f"{name}: {w.message}" for w in caught)
    rep.warnings = list(dict.fromkeys(rep.warnings))
    if fmt == "report":
        (out / "report.txt").write_text(rep.to_text())
    else:
        rep.write_csv(out / "report.csv")
    if escalation is not None:
        raise escalation
    return rep

