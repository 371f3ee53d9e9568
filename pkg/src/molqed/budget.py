"""Analytic decoherence, heating, gate and readout figures for one operating point.

Formulas written with a tilde (order-of-magnitude estimates) are evaluated
with prefactor 1 and tagged ``"order-of-magnitude"`` in the exported report;
the gate time, dispersive angle, n_crit, SNR and Purcell-like rate are exact
expressions and tagged ``"formula"``.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import asdict, dataclass, field, fields

from scipy import optimize

from .rotor import DEFAULT_N_MAX, linear_regime_field, splitting_sensitivity
from .units import CONSTANTS, MoleculeSpec

__all__ = [
    "NoiseSpec",
    "ErrorBudget",
    "TwoQubitGate",
    "Readout",
    "ValidityWarning",
    "voltage_dephasing",
    "thermal_dephasing",
    "heating_rate",
    "single_qubit_error",
    "two_qubit_gate",
    "dispersive_readout",
    "assemble_budget",
    "BUDGET_UNITS",
]

# dispersive validity and gate adiabaticity both want Delta >= 5 g
VALIDITY_RATIO = 5.0


class ValidityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class NoiseSpec:
    """Charge-noise and amplifier model.

    ``S_Q_coeff`` is the 1/f charge noise at 1 Hz in units of e^2/Hz, turned into
    a voltage spectrum through the trap electrode capacitance ``C_t``.
    ``V_rms_eff`` is the effective rms voltage seen by qubit phase
    fluctuations; it is taken as an input rather than integrated from S_V.
    """

    S_Q_coeff: float = 1e-6
    C_t: float = 1e-15
    V_EZ: float = 0.1
    V_rms_eff: float = 0.2e-6
    T_N: float = 5.0

    def __post_init__(self):
        if self.S_Q_coeff < 0 or self.V_rms_eff < 0 or self.T_N < 0:
            raise ValueError("noise amplitudes and temperatures must be non-negative")
        if self.C_t <= 0 or self.V_EZ <= 0:
            raise ValueError("C_t and V_EZ must be positive")

    def S_V(self, f: float) -> float:
        """Voltage noise spectral density (V^2/Hz) at ordinary frequency f."""
        if f <= 0:
            raise ValueError("S_V needs f > 0")
        e = CONSTANTS.elementary_charge
        return self.S_Q_coeff * e * e / (self.C_t**2 * f)


def voltage_dephasing(mol: MoleculeSpec, E_dc: float, w: float, noise: NoiseSpec,
                      N_max: int = DEFAULT_N_MAX) -> tuple[float, float]:
    """(gamma_V, gamma_V2) in rad/s at bias E_dc for electrode scale w.

    gamma_V = |d omega_0/dE| dE and gamma_V2 = |d^2 omega_0/dE^2| dE^2 with
    dE = V_rms_eff / w.
    """
    if w <= 0:
        raise ValueError("w must be positive")
    dE = noise.V_rms_eff / w
    if dE == 0:
        return 0.0, 0.0
    d1 = splitting_sensitivity(mol, E_dc, N_max, order=1)
    d2 = splitting_sensitivity(mol, E_dc, N_max, order=2)
    return abs(d1) * dE, abs(d2) * dE * dE


def thermal_dephasing(mol: MoleculeSpec, omega_t: float, n_bar: float, encoding: str = "rotational") -> float:
    """Motional dephasing rate (rad/s): (omega_t^2/B) n^2, or omega_t n / 1e3 for hyperfine qubits."""
    if n_bar < 0:
        raise ValueError("n_bar must be non-negative")
    if encoding == "rotational":
        return omega_t**2 / mol.B * n_bar**2
    if encoding == "hyperfine":
        return omega_t * n_bar / 1e3
    raise ValueError(f"unknown qubit encoding {encoding!r} (rotational or hyperfine)")


def heating_rate(omega_t: float, w: float, a0: float, noise: NoiseSpec) -> float:
    """Gamma_01 ~ omega_t^2 (w/a0)^2 S_V(omega_t) / V_EZ^2 in rad/s."""
    if omega_t <= 0 or w <= 0 or a0 <= 0:
        raise ValueError("omega_t, w and a0 must be positive")
    S = noise.S_V(omega_t / (2 * math.pi))
    return omega_t**2 * (w / a0) ** 2 * S / noise.V_EZ**2


def single_qubit_error(gamma_star: float, Omega: float) -> float:
    """Error bound (gamma*/Omega)^2 per Rabi cycle, capped at 1."""
    if Omega <= 0:
        raise ValueError("Omega must be positive")
    return min(1.0, (gamma_star / Omega) ** 2)


@dataclass(frozen=True)
class TwoQubitGate:
    tau: float
    p_sp: float
    p_dep: float
    # prefactor-free closed form (kappa gamma*/g^2)^(2/3)
    p_err: float
    Delta_used: float
    Delta_opt: float
    # numerical argmin of p_sp + p_dep and the minimum itself
    Delta_numeric: float
    p_sum_min: float

    @property
    def p_sum(self) -> float:
        return self.p_sp + self.p_dep


def _gate_errors(g, kappa, gamma_star, Delta):
    tau = math.pi * Delta / (2 * g * g)
    p_sp = kappa * g * g / Delta**2 * tau
    p_dep = (gamma_star * tau) ** 2
    return tau, p_sp, p_dep


def two_qubit_gate(g: float, kappa: float, gamma_star: float, Delta: float | None = None) -> TwoQubitGate:
    """Resonator-mediated exchange gate between two molecules detuned by Delta.

    Without ``Delta`` the gate runs at Delta* = (g^4 kappa / (pi gamma*^2))^(1/3),
    the stationary point of p_sp + p_dep. The minimum is also located
    numerically so the closed form can be checked.
    """
    if g <= 0 or kappa < 0 or gamma_star < 0:
        raise ValueError("need g > 0 and non-negative kappa, gamma*")
    if gamma_star == 0 or kappa == 0:
        d_opt = math.inf
        d_num, p_min = math.inf, 0.0
    else:
        d_opt = (g**4 * kappa / (math.pi * gamma_star**2)) ** (1 / 3)
        total = lambda s: sum(_gate_errors(g, kappa, gamma_star, d_opt * math.exp(s))[1:])  # noqa: E731
        res = optimize.minimize_scalar(total, bounds=(-5.0, 5.0), method="bounded", options={"xatol": 1e-10})
        d_num, p_min = d_opt * math.exp(res.x), float(res.fun)
    p_err = (kappa * gamma_star / g**2) ** (2 / 3)
    if Delta is None:
        if math.isinf(d_opt):
            warnings.warn("optimal detuning diverges (gamma* or kappa is zero); supply Delta for a finite gate",
                          ValidityWarning, stacklevel=2)
            return TwoQubitGate(math.inf, 0.0, 0.0, p_err, math.inf, d_opt, d_num, p_min)
        Delta = d_opt
    if Delta <= 0:
        raise ValueError("Delta must be positive")
    if Delta < VALIDITY_RATIO * g:
        warnings.warn(f"Delta/g = {Delta / g:.2f} < {VALIDITY_RATIO}: dispersive exchange not adiabatic",
                      ValidityWarning, stacklevel=2)
    tau, p_sp, p_dep = _gate_errors(g, kappa, gamma_star, Delta)
    return TwoQubitGate(tau, p_sp, p_dep, p_err, Delta, d_opt, d_num, p_min)


@dataclass(frozen=True)
class Readout:
    theta0: float
    n_crit: float
    P_read: float
    SNR: float
    gamma_kappa: float
    T1: float
    snr_gain: float
    n_amp: float


def dispersive_readout(g: float, kappa: float, Delta_r: float, omega0: float, noise: NoiseSpec,
                       n_amp: float | None = None) -> Readout:
    """Dispersive phase readout of the molecular qubit through the resonator.

    ``n_amp`` defaults to k_B T_N / (hbar omega0).
    """
    if kappa <= 0 or Delta_r <= 0 or omega0 <= 0 or g < 0:
        raise ValueError("need kappa, Delta_r, omega0 > 0 and g >= 0")
    if g > 0 and Delta_r < VALIDITY_RATIO * g:
        warnings.warn(f"Delta_r/g = {Delta_r / g:.2f} < {VALIDITY_RATIO}: outside the dispersive regime",
                      ValidityWarning, stacklevel=2)
    if n_amp is None:
        n_amp = CONSTANTS.k_B * noise.T_N / (CONSTANTS.hbar * omega0)
    theta0 = math.atan(2 * g * g / (kappa * Delta_r))
    n_crit = math.inf if g == 0 else Delta_r**2 / (4 * g * g)
    P_read = n_crit * CONSTANTS.hbar * omega0 * kappa
    if g == 0:
        snr = 0.0
    elif n_amp == 0:
        snr = math.inf
    else:
        snr = math.sin(theta0) ** 2 * n_crit / n_amp
    gamma_kappa = kappa * g * g / Delta_r**2
    T1 = math.inf if gamma_kappa == 0 else 1.0 / gamma_kappa
    gain = math.inf if gamma_kappa == 0 else kappa / gamma_kappa
    return Readout(theta0, n_crit, P_read, snr, gamma_kappa, T1, gain, n_amp)


BUDGET_UNITS = {
    "gamma_V": "rad/s", "gamma_V2": "rad/s", "gamma_T": "rad/s", "gamma_T_hf": "rad/s",
    "gamma_star": "rad/s", "Gamma_01": "rad/s", "p_1q": "1", "tau_2q": "s", "Delta_opt": "rad/s",
    "p_sp": "1", "p_dep": "1", "p_err": "1", "p_sum": "1", "theta0": "rad", "n_crit": "1",
    "P_read": "W", "SNR": "1", "gamma_kappa": "rad/s", "T1_readout": "s",
}

_ORDER_OF_MAGNITUDE = {"gamma_V", "gamma_V2", "gamma_T", "gamma_T_hf", "Gamma_01", "p_err"}


@dataclass(frozen=True)
class ErrorBudget:
    gamma_V: float
    gamma_V2: float
    gamma_T: float
    gamma_T_hf: float
    gamma_star: float
    Gamma_01: float
    p_1q: float
    tau_2q: float
    Delta_opt: float
    p_sp: float
    p_dep: float
    p_err: float
    p_sum: float
    theta0: float
    n_crit: float
    P_read: float
    SNR: float
    gamma_kappa: float
    T1_readout: float
    warnings: tuple[str, ...] = field(default=())

    def values(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "warnings"}

    def provenance(self, key: str) -> str:
        return "order-of-magnitude" if key in _ORDER_OF_MAGNITUDE else "formula"

    def to_report(self) -> str:
        lines = [f"{k} = {v:.6e} {BUDGET_UNITS[k]} [{self.provenance(k)}]" for k, v in self.values().items()]
        lines += [f"warning: {w}" for w in self.warnings]
        return "\n".join(lines) + "\n"

    def csv_header(self) -> tuple[list[str], list[str]]:
        keys = list(self.values())
        return keys, [BUDGET_UNITS[k] for k in keys]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        keys, units = self.csv_header()
        writer.writerow(keys)
        writer.writerow(units)
        writer.writerow([f"{v:.17e}" for v in self.values().values()])
        return buf.getvalue()

    def as_dict(self) -> dict:
        return asdict(self)


def assemble_budget(mol: MoleculeSpec, E_dc: float, w: float, omega_t: float, a0: float, n_bar: float,
                    g: float, kappa: float, Omega: float, Delta_r: float, omega0: float,
                    noise: NoiseSpec = NoiseSpec(), E_linear: float | None = None,
                    Delta: float | None = None, n_amp: float | None = None,
                    N_max: int = DEFAULT_N_MAX) -> ErrorBudget:
    """Combine dephasing, heating, gate and readout figures at one operating point.

    ``E_dc`` is the trap-bottom bias (normally the sweet spot) and sets gamma_V2;
    ``E_linear`` is the field used for the linear-regime rate gamma_V
    (defaults to where |d omega_0/dE| peaks).
    """
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        E_lin = linear_regime_field(mol, N_max) if E_linear is None else E_linear
        gamma_V, _ = voltage_dephasing(mol, E_lin, w, noise, N_max)
        _, gamma_V2 = voltage_dephasing(mol, E_dc, w, noise, N_max)
        gamma_T = thermal_dephasing(mol, omega_t, n_bar, "rotational")
        gamma_T_hf = thermal_dephasing(mol, omega_t, n_bar, "hyperfine")
        gamma_star = gamma_T + gamma_V2
        Gamma_01 = heating_rate(omega_t, w, a0, noise)
        p_1q = single_qubit_error(gamma_star, Omega)
        gate = two_qubit_gate(g, kappa, gamma_star, Delta)
        ro = dispersive_readout(g, kappa, Delta_r, omega0, noise, n_amp)
    notes = tuple(str(c.message) for c in caught)
    return ErrorBudget(
        gamma_V=gamma_V, gamma_V2=gamma_V2, gamma_T=gamma_T, gamma_T_hf=gamma_T_hf, gamma_star=gamma_star,
        Gamma_01=Gamma_01, p_1q=p_1q, tau_2q=gate.tau, Delta_opt=gate.Delta_used, p_sp=gate.p_sp,
        p_dep=gate.p_dep, p_err=gate.p_err, p_sum=gate.p_sum, theta0=ro.theta0, n_crit=ro.n_crit,
        P_read=ro.P_read, SNR=ro.SNR, gamma_kappa=ro.gamma_kappa, T1_readout=ro.T1, warnings=notes,
    )
